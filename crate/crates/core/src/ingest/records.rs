use std::io::Read;

use serde::Serialize;

use super::{
    normalize_group_code, score_items, FacetVector, ItemCoding, ItemResponseRecord, Keying, PanelRow,
    Sex, FACETS, ITEMS,
};
use crate::error::{Error, Result};

const LEAD_COLUMNS: [&str; 4] = ["respondent_id", "country", "age", "sex"];

/// A rejected input line. Rejected rows are counted and never imputed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    pub line: u64,
    pub respondent_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ReadOutcome {
    pub rows: Vec<PanelRow>,
    pub rejects: Vec<Reject>,
    pub records_read: usize,
}

fn expected_header(prefix: char, count: usize, width: usize) -> Vec<String> {
    LEAD_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((1..=count).map(|i| format!("{prefix}{i:0width$}")))
        .collect()
}

fn check_header(found: &csv::StringRecord, expected: &[String]) -> Result<()> {
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| a != b) {
        let shown = expected.iter().take(6).cloned().collect::<Vec<_>>().join(",");
        return Err(Error::MalformedRecord {
            line: 1,
            reason: format!("header must be {shown},...,{}", expected.last().unwrap()),
        });
    }
    Ok(())
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader)
}

struct Lead {
    respondent_id: String,
    group_code: String,
    age: Option<u16>,
    sex: Option<Sex>,
}

fn parse_lead(rec: &csv::StringRecord) -> std::result::Result<Lead, String> {
    let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
    let group_code = normalize_group_code(field(1)).map_err(|e| e.to_string())?;
    let age = match field(2) {
        "" => None,
        s => Some(s.parse::<u16>().map_err(|_| format!("bad age {s:?}"))?),
    };
    let sex = match field(3) {
        "" => None,
        s => Some(s.parse::<Sex>().map_err(|e| e.to_string())?),
    };
    Ok(Lead { respondent_id: field(0).to_string(), group_code, age, sex })
}

fn read_rows<R: Read>(
    reader: R,
    header: &[String],
    mut parse: impl FnMut(&csv::StringRecord) -> std::result::Result<PanelRow, String>,
) -> Result<ReadOutcome> {
    let mut rdr = csv_reader(reader);
    let found = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    check_header(&found, header)?;
    let mut out = ReadOutcome::default();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {
                out.records_read += 1;
                let line = rec.position().map_or(0, |p| p.line());
                if rec.len() != header.len() {
                    out.rejects.push(Reject {
                        line,
                        respondent_id: rec.get(0).unwrap_or("").trim().to_string(),
                        reason: format!("expected {} fields, found {}", header.len(), rec.len()),
                    });
                    continue;
                }
                match parse(&rec) {
                    Ok(row) => out.rows.push(row),
                    Err(reason) => out.rejects.push(Reject {
                        line,
                        respondent_id: rec.get(0).unwrap_or("").trim().to_string(),
                        reason,
                    }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if !matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) {
                    return Err(Error::MalformedRecord { line, reason: e.to_string() });
                }
                out.records_read += 1;
                out.rejects.push(Reject { line, respondent_id: String::new(), reason: e.to_string() });
            }
        }
    }
    Ok(out)
}

/// Reads `respondent_id,country,age,sex,i001..i300` and scores each row.
pub fn read_raw_responses<R: Read>(reader: R, coding: ItemCoding, keying: &Keying) -> Result<ReadOutcome> {
    let header = expected_header('i', ITEMS, 3);
    read_rows(reader, &header, |rec| {
        let lead = parse_lead(rec)?;
        let items = rec
            .iter()
            .skip(LEAD_COLUMNS.len())
            .enumerate()
            .map(|(i, s)| {
                s.trim().parse::<u8>().map_err(|_| format!("item {} value {s:?} is not an integer", i + 1))
            })
            .collect::<std::result::Result<Vec<u8>, String>>()?;
        let record = ItemResponseRecord {
            respondent_id: lead.respondent_id,
            group_code: lead.group_code,
            age: lead.age,
            sex: lead.sex,
            items,
        };
        let vector = score_items(&record, keying, coding)?;
        Ok(PanelRow { group_code: record.group_code, vector })
    })
}

/// Reads pre-scored `respondent_id,country,age,sex,f01..f30` rows.
pub fn read_scored<R: Read>(reader: R, coding: ItemCoding) -> Result<ReadOutcome> {
    let header = expected_header('f', FACETS, 2);
    read_rows(reader, &header, |rec| {
        let lead = parse_lead(rec)?;
        let mut facets = [0.0; FACETS];
        for (i, s) in rec.iter().skip(LEAD_COLUMNS.len()).enumerate() {
            facets[i] = s
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("facet {} value {s:?} is not a number", i + 1))?;
        }
        let vector = FacetVector::raw(facets, coding).map_err(|e| e.to_string())?;
        Ok(PanelRow { group_code: lead.group_code, vector })
    })
}

/// Reads `item_index,facet_index,reverse` with 1-based indices.
pub fn read_keying<R: Read>(reader: R) -> Result<Keying> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::MalformedKeying(e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["item_index", "facet_index", "reverse"] {
        return Err(Error::MalformedKeying("header must be item_index,facet_index,reverse".into()));
    }
    let mut entries = Vec::with_capacity(ITEMS);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::MalformedKeying(e.to_string()))?;
        let num = |i: usize| -> Result<usize> {
            let s = rec.get(i).unwrap_or("").trim();
            s.parse::<usize>()
                .map_err(|_| Error::MalformedKeying(format!("bad integer {s:?}")))
        };
        let (item, facet, rev) = (num(0)?, num(1)?, num(2)?);
        if item == 0 || facet == 0 || rev > 1 {
            return Err(Error::MalformedKeying(format!("bad row {item},{facet},{rev}")));
        }
        entries.push((item - 1, facet - 1, rev == 1));
    }
    Keying::from_entries(&entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_line(id: &str, cc: &str, v: u8) -> String {
        let items: Vec<String> = (0..ITEMS).map(|_| v.to_string()).collect();
        format!("{id},{cc},25,F,{}\n", items.join(","))
    }

    fn raw_header() -> String {
        expected_header('i', ITEMS, 3).join(",") + "\n"
    }

    #[test]
    fn header_spelling() {
        let h = expected_header('i', ITEMS, 3);
        assert_eq!(h[4], "i001");
        assert_eq!(h[303], "i300");
        let h = expected_header('f', FACETS, 2);
        assert_eq!(h[4], "f01");
        assert_eq!(h[33], "f30");
    }

    #[test]
    fn raw_csv_scores_and_rejects_with_line_numbers() {
        let mut text = raw_header();
        text += &raw_line("a", "us", 5);
        text += &raw_line("b", "US", 7);
        text += "c,US,25,F,1,2,3\n";
        text += &raw_line("d", "GB", 1);
        let out = read_raw_responses(text.as_bytes(), ItemCoding::default(), &Keying::cyclic()).unwrap();
        assert_eq!(out.records_read, 4);
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.rows[0].group_code, "US");
        assert_eq!(out.rows[0].vector.facets()[0], 50.0);
        assert_eq!(out.rows[1].vector.facets()[29], 10.0);
        let lines: Vec<u64> = out.rejects.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4]);
    }

    #[test]
    fn wrong_header_is_fatal() {
        let text = "respondent_id,country,age,sex,f01\n";
        assert!(read_raw_responses(text.as_bytes(), ItemCoding::default(), &Keying::cyclic()).is_err());
    }

    #[test]
    fn scored_rows_validate_range() {
        let header = expected_header('f', FACETS, 2).join(",");
        let good: Vec<String> = (0..FACETS).map(|i| format!("{}", 10 + i)).collect();
        let mut bad = good.clone();
        bad[3] = "51".into();
        let text = format!("{header}\nx,fr,,,{}\ny,FR,,,{}\n", good.join(","), bad.join(","));
        let out = read_scored(text.as_bytes(), ItemCoding::default()).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].group_code, "FR");
        assert_eq!(out.rejects[0].line, 3);
        assert!(out.rejects[0].reason.contains("facet 4"));
    }

    #[test]
    fn keying_file_round() {
        let mut text = String::from("item_index,facet_index,reverse\n");
        for i in 1..=ITEMS {
            text += &format!("{i},{},{}\n", (i - 1) % FACETS + 1, (i % 7 == 0) as u8);
        }
        let k = read_keying(text.as_bytes()).unwrap();
        assert_eq!(k.facet_of(0), 0);
        assert!(k.is_reversed(6));
        assert!(!k.is_reversed(7));
        assert!(read_keying("item,facet,reverse\n".as_bytes()).is_err());
    }
}
