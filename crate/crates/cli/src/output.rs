//! Artifact writers. Every file starts with the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Shortest round-trip representation, so equal values always print identically.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub struct OutputDir {
    root: PathBuf,
    provenance: Vec<String>,
}

impl OutputDir {
    pub fn create(root: PathBuf, provenance: Vec<String>) -> Result<Self, CliError> {
        fs::create_dir_all(&root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(OutputDir { root, provenance })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// CSV with `# key=value` provenance lines ahead of the header.
    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let mut buf = String::new();
        for line in &self.provenance {
            buf.push_str("# ");
            buf.push_str(line);
            buf.push('\n');
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        for row in rows {
            writer.write_record(row)?;
        }
        let body = writer
            .into_inner()
            .map_err(|e| CliError::Io(e.to_string()))?;
        buf.push_str(&String::from_utf8_lossy(&body));
        self.write(name, &buf)
    }

    /// SVG document preceded by an XML comment carrying the provenance.
    pub fn write_svg(&self, name: &str, svg: &str) -> Result<PathBuf, CliError> {
        let mut buf = String::from("<!--\n");
        for line in &self.provenance {
            buf.push_str(&line.replace("--", "- -"));
            buf.push('\n');
        }
        buf.push_str("-->\n");
        buf.push_str(svg);
        self.write(name, &buf)
    }

    /// Plain text with `# ` provenance lines.
    pub fn write_text(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let mut buf: String = self.provenance.iter().map(|l| format!("# {l}\n")).collect();
        buf.push_str(body);
        self.write(name, &buf)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Reads a CSV artifact back, skipping provenance lines.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers()?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(
            dir.path().join("o"),
            vec!["command=x".into(), "seed=3".into()],
        )
        .unwrap();
        let path = out
            .write_csv("t.csv", &["a", "b"], &[vec![num(0.1), num(2.0)]])
            .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# command=x\n# seed=3\na,b\n0.1,2\n"));
        let (header, rows) = read_csv(&path).unwrap();
        assert_eq!(header, vec!["a", "b"]);
        assert_eq!(rows, vec![vec!["0.1".to_string(), "2".to_string()]]);
    }

    #[test]
    fn svg_comment_is_well_formed() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path().to_path_buf(), vec!["data=a--b".into()]).unwrap();
        let text = fs::read_to_string(out.write_svg("p.svg", "<svg/>").unwrap()).unwrap();
        assert!(text.contains("a- -b") && text.ends_with("<svg/>"));
    }
}
