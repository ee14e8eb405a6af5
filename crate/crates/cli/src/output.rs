//! File emission. Every file is written atomically (temp + rename) so an
//! interrupted sweep never leaves truncated outputs behind.

use std::fs;
use std::io;
use std::path::Path;

/// Write `contents` to `path` via a temporary sibling file and rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Plot-data text: comment header lines, then blocks of two-column rows
/// (x value, metric value), one block per labeled series, separated by
/// blank lines — directly loadable by common plotting tools.
pub fn plot_data(x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# columns: {x_label} {y_label}\n"));
    for (idx, (label, points)) in series.iter().enumerate() {
        if idx > 0 {
            out.push('\n');
        }
        out.push_str(&format!("# series: {label}\n"));
        for (x, y) in points {
            out.push_str(&format!("{x} {y}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("file.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert!(!path.with_file_name("file.txt.tmp").exists());
    }

    #[test]
    fn plot_data_blocks() {
        let text = plot_data(
            "passes",
            "f_gap",
            &[
                ("a".into(), vec![(1.0, 0.5)]),
                ("b".into(), vec![(1.0, 0.25)]),
            ],
        );
        assert!(text.starts_with("# columns: passes f_gap\n"));
        assert!(text.contains("# series: a\n1 0.5\n"));
        assert!(text.contains("\n\n# series: b\n"));
    }
}
