use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Column, ColumnKind, DataError, Dataset};

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

/// Reads a headed CSV table. Columns named in `schema` are parsed as the
/// given kind; the rest are inferred (all integers -> integer, all numbers
/// -> numeric, otherwise factor with levels in first-appearance order).
pub fn read_csv<R: Read>(
    source: R,
    schema: Option<&HashMap<String, ColumnKind>>,
) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DataError::Empty);
    }
    for (pos, name) in header.iter().enumerate() {
        if name.is_empty() {
            return Err(DataError::EmptyColumnName(pos));
        }
        if header[..pos].contains(name) {
            return Err(DataError::DuplicateColumn(name.clone()));
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(DataError::Ragged {
                row: row + 1,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                return Err(DataError::Missing {
                    row: row + 1,
                    column: header[j].clone(),
                });
            }
            cells[j].push(cell.to_string());
        }
    }
    let n_rows = cells.first().map(Vec::len).unwrap_or(0);

    let mut columns = Vec::with_capacity(header.len());
    for (name, values) in header.into_iter().zip(cells) {
        let declared = schema.and_then(|s| s.get(&name)).copied();
        let col = match declared {
            Some(kind) => parse_as(&name, &values, kind)?,
            None => infer(&name, &values)?,
        };
        columns.push((name, col));
    }
    Dataset::with_rows(columns, n_rows)
}

pub fn read_csv_path(
    path: impl AsRef<Path>,
    schema: Option<&HashMap<String, ColumnKind>>,
) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), schema)
}

fn parse_as(name: &str, values: &[String], kind: ColumnKind) -> Result<Column, DataError> {
    let bad = |row: usize, value: &str| DataError::Unparseable {
        row: row + 1,
        column: name.to_string(),
        value: value.to_string(),
        kind,
    };
    match kind {
        ColumnKind::Integer => values
            .iter()
            .enumerate()
            .map(|(i, v)| v.parse::<i64>().map_err(|_| bad(i, v)))
            .collect::<Result<Vec<_>, _>>()
            .map(Column::Integer),
        ColumnKind::Numeric => values
            .iter()
            .enumerate()
            .map(|(i, v)| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad(i, v)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Column::Numeric),
        ColumnKind::Factor => Ok(Column::factor_from_strings(values)),
    }
}

fn infer(name: &str, values: &[String]) -> Result<Column, DataError> {
    if values.iter().all(|v| v.parse::<i64>().is_ok()) {
        return parse_as(name, values, ColumnKind::Integer);
    }
    let parsed: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
    match parsed {
        Some(nums) => match nums.iter().position(|x| !x.is_finite()) {
            Some(row) => Err(DataError::Unparseable {
                row: row + 1,
                column: name.to_string(),
                value: values[row].clone(),
                kind: ColumnKind::Numeric,
            }),
            None => Ok(Column::Numeric(nums)),
        },
        None => Ok(Column::factor_from_strings(values)),
    }
}

/// Writes the table as CSV. Numeric cells use the shortest text that
/// round-trips exactly and always carry a decimal point or exponent, so
/// re-reading infers the same kinds for numeric and integer columns.
pub fn write_csv<W: Write>(d: &Dataset, sink: W) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(sink);
    let names: Vec<&str> = d.names().collect();
    if names.is_empty() {
        writer.flush()?;
        return Ok(());
    }
    writer.write_record(&names)?;
    let cols: Vec<&Column> = names.iter().map(|n| d.get(n).unwrap()).collect();
    for i in 0..d.n_rows() {
        writer.write_record(cols.iter().map(|c| c.label(i)))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FISH_HEAD: &str = "\
nofish,livebait,camper,persons,child,xb,zg,count
1,0,no,1,0,-0.8963146,3.0504048,0
0,1,yes,1,0,-0.5583450,1.7461489,0
0,1,no,1,0,-0.4017310,0.2799389,0
";

    #[test]
    fn reads_fish_style_rows() {
        let d = read_csv(FISH_HEAD.as_bytes(), None).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.column("count").unwrap(), &Column::Integer(vec![0, 0, 0]));
        assert_eq!(d.column("camper").unwrap().label(0), "no");
        assert_eq!(d.column("persons").unwrap().label(0), "1");
        assert_eq!(d.column("xb").unwrap().kind(), ColumnKind::Numeric);
    }

    #[test]
    fn header_only_gives_empty_typed_table() {
        let d = read_csv("a,b\n".as_bytes(), None).unwrap();
        assert_eq!(d.n_rows(), 0);
        assert_eq!(d.n_cols(), 2);
        let mut schema = HashMap::new();
        schema.insert("b".to_string(), ColumnKind::Factor);
        let d = read_csv("a,b\n".as_bytes(), Some(&schema)).unwrap();
        assert_eq!(d.column("b").unwrap().kind(), ColumnKind::Factor);
    }

    #[test]
    fn integer_inference() {
        let d = read_csv("v\n1\n2\n2\n".as_bytes(), None).unwrap();
        assert_eq!(d.column("v").unwrap(), &Column::Integer(vec![1, 2, 2]));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            read_csv("".as_bytes(), None),
            Err(DataError::Empty)
        ));
        assert!(matches!(
            read_csv("a,a\n1,2\n".as_bytes(), None),
            Err(DataError::DuplicateColumn(_))
        ));
        assert!(matches!(
            read_csv("a,b\n1,2\n3\n".as_bytes(), None),
            Err(DataError::Ragged { row: 2, .. })
        ));
        assert!(matches!(
            read_csv("a,b\n1,\n".as_bytes(), None),
            Err(DataError::Missing { row: 1, .. })
        ));
        assert!(matches!(
            read_csv("a\n1.5\nNA\n".as_bytes(), None),
            Err(DataError::Missing { .. })
        ));
        assert!(matches!(
            read_csv("a\n1.5\ninf\n".as_bytes(), None),
            Err(DataError::Unparseable { .. })
        ));
        let mut schema = HashMap::new();
        schema.insert("a".to_string(), ColumnKind::Integer);
        assert!(matches!(
            read_csv("a\n1.5\n".as_bytes(), Some(&schema)),
            Err(DataError::Unparseable { row: 1, .. })
        ));
    }

    #[test]
    fn numeric_column_keeps_kind_through_write() {
        let d = Dataset::new(vec![
            ("x".into(), Column::Numeric(vec![1.0, 2.0])),
            ("n".into(), Column::Integer(vec![1, 2])),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back, d);
    }
}
