//! Bucket-level CSV input: `bucket_id,group,pre_value,post_value`.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use prepost_core::{Group, GroupSample, PrePostSample};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 4] = ["bucket_id", "group", "pre_value", "post_value"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub line: u64,
    pub bucket_id: String,
    pub group: Group,
    pub pre_value: Option<f64>,
    pub post_value: f64,
}

/// Rows of one experiment in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub path: PathBuf,
    pub rows: Vec<Row>,
}

fn schema(path: &Path, line: Option<u64>, message: impl Into<String>) -> CliError {
    let message = message.into();
    CliError::Schema {
        path: path.to_path_buf(),
        message: match line {
            Some(l) => format!("line {l}: {message}"),
            None => message,
        },
        line,
    }
}

fn parse_value(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| schema(path, Some(line), format!("{column} `{cell}` is not a number")))?;
    if !v.is_finite() {
        return Err(schema(
            path,
            Some(line),
            format!("{column} `{cell}` is not finite"),
        ));
    }
    Ok(v)
}

impl Dataset {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file, path)
    }

    /// `path` is used for error messages only.
    pub fn from_reader<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = csv.records();

        let header = match records.next() {
            None => return Err(schema(path, None, "file is empty")),
            Some(r) => r.map_err(|e| schema(path, e.position().map(|p| p.line()), e.to_string()))?,
        };
        let fields: Vec<&str> = header.iter().collect();
        let first = fields.first().map(|f| f.trim_start_matches('\u{feff}'));
        if fields.len() != HEADER.len() || first != Some(HEADER[0]) || fields[1..] != HEADER[1..] {
            return Err(schema(
                path,
                Some(1),
                format!(
                    "header must be `{}`, found `{}`",
                    HEADER.join(","),
                    fields.join(",")
                ),
            ));
        }

        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for record in records {
            let record = record.map_err(|e| schema(path, e.position().map(|p| p.line()), e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != HEADER.len() {
                return Err(schema(
                    path,
                    Some(line),
                    format!("expected {} fields, found {}", HEADER.len(), record.len()),
                ));
            }
            let bucket_id = record[0].to_string();
            if bucket_id.is_empty() {
                return Err(schema(path, Some(line), "bucket_id is empty"));
            }
            let group: Group = record[1]
                .parse()
                .map_err(|_| schema(path, Some(line), format!("unknown group `{}`", &record[1])))?;
            let pre_value = match &record[2] {
                "" => None,
                cell => Some(parse_value(path, line, "pre_value", cell)?),
            };
            if record[3].is_empty() {
                return Err(schema(path, Some(line), "post_value is empty"));
            }
            let post_value = parse_value(path, line, "post_value", &record[3])?;
            if !seen.insert((group, bucket_id.clone())) {
                return Err(schema(
                    path,
                    Some(line),
                    format!("duplicate bucket `{bucket_id}` in group {group}"),
                ));
            }
            rows.push(Row {
                line,
                bucket_id,
                group,
                pre_value,
                post_value,
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    pub fn count(&self, group: Group) -> usize {
        self.rows.iter().filter(|r| r.group == group).count()
    }

    /// Post-period values of `(control, treatment)`.
    pub fn post_groups(&self) -> (GroupSample, GroupSample) {
        let values = |g| {
            self.rows
                .iter()
                .filter(|r| r.group == g)
                .map(|r| r.post_value)
                .collect()
        };
        (
            GroupSample::new(Group::Control, values(Group::Control)),
            GroupSample::new(Group::Treatment, values(Group::Treatment)),
        )
    }

    /// Paired streams; every row needs a pre-period value.
    pub fn prepost_sample(&self) -> Result<PrePostSample> {
        if let Some(r) = self.rows.iter().find(|r| r.pre_value.is_none()) {
            return Err(schema(
                &self.path,
                Some(r.line),
                "pre_value is empty; pre-post methods need paired pre/post values",
            ));
        }
        let column = |g: Group, pre: bool| {
            self.rows
                .iter()
                .filter(|r| r.group == g)
                .map(|r| {
                    if pre {
                        r.pre_value.unwrap_or(f64::NAN)
                    } else {
                        r.post_value
                    }
                })
                .collect::<Vec<f64>>()
        };
        Ok(PrePostSample::new(
            column(Group::Control, true),
            column(Group::Control, false),
            column(Group::Treatment, true),
            column(Group::Treatment, false),
        )?)
    }
}

/// Writes `sample` in the input schema; bucket ids count from 0 per group.
pub fn write_sample<W: Write>(sample: &PrePostSample, writer: W) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(HEADER)?;
    for (group, x, y) in [
        (Group::Control, &sample.x_c, &sample.y_c),
        (Group::Treatment, &sample.x_t, &sample.y_t),
    ] {
        for (i, (pre, post)) in x.iter().zip(y.iter()).enumerate() {
            csv.write_record([
                i.to_string(),
                group.to_string(),
                pre.to_string(),
                post.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        Dataset::from_reader(text.as_bytes(), Path::new("t.csv"))
    }

    fn line_of(e: CliError) -> Option<u64> {
        match e {
            CliError::Schema { line, .. } => line,
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn reads_rows_in_order() {
        let d = parse("bucket_id,group,pre_value,post_value\n1,control,1.5,2\n1,treatment,,3e0\n").unwrap();
        assert_eq!(d.rows.len(), 2);
        assert_eq!(d.rows[1].pre_value, None);
        assert_eq!(d.rows[1].post_value, 3.0);
        assert_eq!(d.rows[1].line, 3);
    }

    #[test]
    fn rejects_bad_header() {
        let e = parse("bucket,group,pre_value,post_value\n").unwrap_err();
        assert_eq!(line_of(e), Some(1));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let head = "bucket_id,group,pre_value,post_value\n1,control,1,2\n";
        for (bad, line) in [
            ("2,control,1,abc\n", 3),
            ("2,control,1,NaN\n", 3),
            ("2,other,1,2\n", 3),
            ("1,control,1,2\n", 3),
            ("2,control,1\n", 3),
            ("2,control,1,\n", 3),
            ("2,control,\"1,000\",2\n", 3),
        ] {
            let e = parse(&format!("{head}{bad}")).unwrap_err();
            assert_eq!(line_of(e), Some(line), "{bad}");
        }
    }

    #[test]
    fn missing_pre_value_blocks_pairing() {
        let d = parse("bucket_id,group,pre_value,post_value\n1,control,1,2\n2,control,,2\n").unwrap();
        assert_eq!(line_of(d.prepost_sample().unwrap_err()), Some(3));
    }

    #[test]
    fn writer_round_trips() {
        let s = PrePostSample::new(
            vec![1.0, 2.5, 0.1 + 0.2],
            vec![3.0, 4.0, -5.25],
            vec![1e-7, 2.0, 3.0],
            vec![7.0, 8.0, 1e300],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_sample(&s, &mut buf).unwrap();
        let back = Dataset::from_reader(buf.as_slice(), Path::new("t.csv")).unwrap();
        assert_eq!(back.prepost_sample().unwrap(), s);
    }
}
