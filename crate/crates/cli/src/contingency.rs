//! Split-ballot poll counts from CSV with header `order,a_answer,b_answer,count`.

use qmt_core::montecarlo::AnswerTable;

use crate::error::{CliError, CliResult};

const HEADER: [&str; 4] = ["order", "a_answer", "b_answer", "count"];

fn parse_error(line: usize, message: String) -> CliError {
    CliError::Parse {
        source_name: "contingency table".into(),
        line,
        column: 0,
        message,
    }
}

fn answer(field: &str, column: &str, line: usize) -> CliResult<usize> {
    match field.trim() {
        "y" => Ok(0),
        "n" => Ok(1),
        other => Err(parse_error(line, format!("row {line}: {column} '{other}' is not y or n"))),
    }
}

/// Returns `(counts_ab, counts_ba)`, each indexed `[a answer][b answer]`
/// with 0 = yes. Missing cells are zero; repeated cells add up.
pub fn ingest_contingency(text: &str) -> CliResult<(AnswerTable, AnswerTable)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_error(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_error(1, format!("header must be '{}'", HEADER.join(","))));
    }
    let mut ab = [[0; 2]; 2];
    let mut ba = [[0; 2]; 2];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let table = match &record[0] {
            "AB" => &mut ab,
            "BA" => &mut ba,
            other => return Err(parse_error(line, format!("row {line}: order '{other}' is not AB or BA"))),
        };
        let a = answer(&record[1], "a_answer", line)?;
        let b = answer(&record[2], "b_answer", line)?;
        let count: i64 = record[3]
            .parse()
            .map_err(|_| parse_error(line, format!("row {line}: count '{}' is not an integer", &record[3])))?;
        if count < 0 {
            return Err(CliError::NegativeCount { row: line, count });
        }
        table[a][b] += count as u64;
    }
    Ok((ab, ba))
}
