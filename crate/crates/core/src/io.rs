//! CSV ingestion and prediction output.
//!
//! Label files carry `task,worker,label` rows with labels `1`/`-1` (also
//! `+1`); gold files carry `task,label`. Task and worker names are arbitrary
//! strings, interned to dense ids in order of first appearance.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{Label, LabelMatrix, LabelRecord, Prediction};

#[derive(Debug, Clone, Default)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub matrix: LabelMatrix,
    pub tasks: Interner,
    pub workers: Interner,
}

fn parse_label(raw: &str, line: u64) -> Result<Label> {
    match raw.trim() {
        "1" | "+1" => Ok(Label::Pos),
        "-1" => Ok(Label::Neg),
        other => Err(Error::Parse {
            line,
            message: format!("label must be 1 or -1, got `{other}` (only binary labels are supported)"),
        }),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, got `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Reads a label CSV; rows keep file order as arrival order.
pub fn read_labels<R: Read>(input: R) -> Result<Dataset> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["task", "worker", "label"])?;
    let mut data = Dataset::default();
    for (seq, row) in rdr.records().enumerate() {
        let row =
            row.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = line_of(&row);
        if row.len() != 3 {
            return Err(Error::Parse { line, message: format!("expected 3 fields, got {}", row.len()) });
        }
        let label = parse_label(&row[2], line)?;
        let task = data.tasks.intern(&row[0]);
        let worker = data.workers.intern(&row[1]);
        data.matrix.insert(LabelRecord::new(task, worker, label, seq as u64 + 1)).map_err(|_| Error::Parse {
            line,
            message: format!("duplicate label from worker `{}` on task `{}`", &row[1], &row[0]),
        })?;
    }
    Ok(data)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gold {
    /// Gold class per known task id, if any.
    pub classes: Vec<Option<Label>>,
    /// Gold rows naming tasks that never received a label.
    pub unknown_tasks: Vec<String>,
}

impl Gold {
    pub fn labelled(&self) -> usize {
        self.classes.iter().flatten().count()
    }

    /// Errors among gold-labelled tasks.
    pub fn errors(&self, prediction: &Prediction) -> usize {
        self.classes.iter().zip(&prediction.classes).filter(|(g, p)| g.is_some_and(|g| g != **p)).count()
    }
}

pub fn read_gold<R: Read>(input: R, tasks: &Interner) -> Result<Gold> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["task", "label"])?;
    let mut gold = Gold { classes: vec![None; tasks.len()], unknown_tasks: Vec::new() };
    for row in rdr.records() {
        let row =
            row.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = line_of(&row);
        if row.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 fields, got {}", row.len()) });
        }
        let label = parse_label(&row[1], line)?;
        match tasks.get(&row[0]) {
            Some(id) => gold.classes[id] = Some(label),
            None => gold.unknown_tasks.push(row[0].to_owned()),
        }
    }
    Ok(gold)
}

/// `task,label[,log_odds]`.
pub fn write_predictions<W: Write>(out: W, tasks: &Interner, prediction: &Prediction, scores: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_scores = scores && prediction.log_odds.is_some();
    if with_scores {
        w.write_record(["task", "label", "log_odds"])?;
    } else {
        w.write_record(["task", "label"])?;
    }
    for (id, class) in prediction.classes.iter().enumerate() {
        let label = class.as_i8().to_string();
        match (&prediction.log_odds, with_scores) {
            (Some(z), true) => w.write_record([tasks.name(id), &label, &z[id].to_string()])?,
            _ => w.write_record([tasks.name(id), &label])?,
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LABELS: &str = "task,worker,label\na,w1,1\nb,w1,-1\na,w2,+1\n";

    #[test]
    fn reads_labels_in_order() {
        let d = read_labels(LABELS.as_bytes()).unwrap();
        assert_eq!(d.tasks.names(), ["a", "b"]);
        assert_eq!(d.workers.names(), ["w1", "w2"]);
        assert_eq!(d.matrix.len(), 3);
        assert_eq!(d.matrix.task_labels(0), [(0, Label::Pos), (1, Label::Pos)]);
        assert_eq!(d.matrix.records()[1].seq, 2);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let bad = "task,worker,label\na,w1,1\nb,w1,2\n";
        assert!(matches!(read_labels(bad.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let dup = "task,worker,label\na,w1,1\na,w1,-1\n";
        assert!(matches!(read_labels(dup.as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_labels("t,w,l\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_labels("task,worker,label\na,b\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn empty_file_is_an_empty_dataset() {
        let d = read_labels("task,worker,label\n".as_bytes()).unwrap();
        assert!(d.matrix.is_empty() && d.tasks.is_empty());
    }

    #[test]
    fn gold_skips_unknown_tasks() {
        let d = read_labels(LABELS.as_bytes()).unwrap();
        let g = read_gold("task,label\nb,1\nzz,-1\n".as_bytes(), &d.tasks).unwrap();
        assert_eq!(g.classes, [None, Some(Label::Pos)]);
        assert_eq!(g.unknown_tasks, ["zz"]);
        let p = Prediction { classes: vec![Label::Neg, Label::Neg], log_odds: None };
        assert_eq!((g.labelled(), g.errors(&p)), (1, 1));
    }

    #[test]
    fn prediction_csv() {
        let d = read_labels(LABELS.as_bytes()).unwrap();
        let p = Prediction { classes: vec![Label::Pos, Label::Neg], log_odds: Some(vec![2.0, -0.5]) };
        let mut buf = Vec::new();
        write_predictions(&mut buf, &d.tasks, &p, true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "task,label,log_odds\na,1,2\nb,-1,-0.5\n");
        let mut buf = Vec::new();
        write_predictions(&mut buf, &d.tasks, &p, false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "task,label\na,1\nb,-1\n");
    }
}
