//! Output helpers shared by reports and the command line.

use crate::error::{Error, Result};

/// First line of every CSV file written by this crate.
pub const SCHEMA_LINE: &str = "# heatlab-schema v1";

/// CSV text with the schema comment, a header row and the given rows.
pub fn csv_table(headers: &[&str], rows: &[Vec<String>]) -> Result<String> {
    csv_table_with_metadata(headers, rows, &[])
}

/// Like [`csv_table`], with `# key: value` comment lines after the schema line.
pub fn csv_table_with_metadata(headers: &[&str], rows: &[Vec<String>], metadata: &[(&str, String)]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(headers).map_err(output_error)?;
    for row in rows {
        writer.write_record(row).map_err(output_error)?;
    }
    let body = writer.into_inner().map_err(|e| Error::Output(e.to_string()))?;
    let body = String::from_utf8(body).map_err(|e| Error::Output(e.to_string()))?;
    let mut out = format!("{SCHEMA_LINE}\n");
    for (key, value) in metadata {
        out.push_str(&format!("# {key}: {value}\n"));
    }
    out.push_str(&body);
    Ok(out)
}

/// The CSV text without its leading comment lines.
pub fn csv_body(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.find('\n').map_or("", |i| &rest[i + 1..]);
    }
    rest
}

fn output_error(e: csv::Error) -> Error {
    Error::Output(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let t = csv_table(&["a", "b"], &[vec!["1".into(), "x".into()]]).unwrap();
        assert_eq!(t, "# heatlab-schema v1\na,b\n1,x\n");
        assert_eq!(csv_body(&t), "a,b\n1,x\n");
        let m = csv_table_with_metadata(&["a"], &[vec!["1".into()]], &[("seed", "7".into())]).unwrap();
        assert_eq!(m, "# heatlab-schema v1\n# seed: 7\na\n1\n");
        assert_eq!(csv_body(&m), "a\n1\n");
    }
}
