//! CSV readers and writers. Every writer's output is accepted by the
//! matching reader, and floats are written in shortest round-trip form.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use pirum_core::battery::{Battery, PairId, QuestionSet, QUESTIONS_PER_BLOCK};
use pirum_core::estimation::{Estimate, Flag};
use pirum_core::{ChoiceDataset, GridSpec, ModelParams, OrderVerdict, Response, SubjectRecord, UtilityFamily};

use crate::error::{Error, Result};

pub const CHOICES_HEADER: [&str; 4] = ["subject_id", "block", "question", "response"];
pub const BATTERY_HEADER: [&str; 8] = ["block", "question", "p", "x_hi", "x_lo", "y_hi", "y_lo", "threshold_gamma"];
pub const FIT_HEADER: [&str; 6] = ["subject_id", "gamma", "lambda", "kappa", "loglik", "flag"];
pub const SUMMARY_HEADER: [&str; 7] = ["model", "gamma", "se_gamma", "lambda", "se_lambda", "kappa", "se_kappa"];
pub const VERDICT_HEADER: [&str; 6] =
    ["pair_id", "pi_ordered", "omega_ordered", "crossings", "peak_theta", "peak_premium"];
pub const TRUTH_HEADER: [&str; 4] = ["subject_id", "gamma", "lambda", "kappa"];

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::File { path: path.to_path_buf(), source })
}

pub fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::File { path: path.to_path_buf(), source })
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn check_header<R: Read>(rd: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let got = rd.headers()?;
    if got.len() < want.len() || got.iter().zip(want).any(|(g, w)| g != *w) {
        return Err(Error::Line { line: 1, msg: format!("expected header `{}`, found `{}`", want.join(","), got.iter().collect::<Vec<_>>().join(",")) });
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, name: &str) -> Result<&'a str> {
    rec.get(i).ok_or_else(|| Error::Line { line: line_of(rec), msg: format!("missing column `{name}`") })
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let s = field(rec, i, name)?;
    s.parse().map_err(|_| Error::Line { line: line_of(rec), msg: format!("`{s}` is not a valid {name}") })
}

fn parse_opt(rec: &csv::StringRecord, i: usize, name: &str) -> Result<Option<f64>> {
    if field(rec, i, name)?.is_empty() {
        Ok(None)
    } else {
        parse(rec, i, name).map(Some)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---- choices ----

/// Reads `subject_id,block,question,response` rows. Subjects keep the order
/// of their first row; each is assigned the question set its pairs cover.
pub fn read_choices<R: Read>(r: R, battery: &Battery) -> Result<ChoiceDataset> {
    let mut rd = reader(r);
    check_header(&mut rd, &CHOICES_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(PairId, usize, Response, u64)>> = HashMap::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let id = field(&rec, 0, "subject_id")?.to_string();
        if id.is_empty() {
            return Err(Error::Line { line, msg: "empty subject_id".into() });
        }
        let pid = PairId::new(parse(&rec, 1, "block")?, parse(&rec, 2, "question")?);
        let j = battery
            .index_of(pid)
            .ok_or_else(|| Error::Line { line, msg: format!("block {} question {} is not in the battery", pid.block, pid.question) })?;
        let resp: Response = field(&rec, 3, "response")?
            .parse()
            .map_err(|e: pirum_core::Error| Error::Line { line, msg: e.to_string() })?;
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Vec::new()
        });
        if let Some(first) = entry.iter().find(|r| r.0 == pid) {
            return Err(Error::Line { line, msg: format!("subject {id} answers {pid} twice (first on line {})", first.3) });
        }
        entry.push((pid, j, resp, line));
    }
    let mut subjects = Vec::with_capacity(order.len());
    for id in order {
        let answers = rows.remove(&id).unwrap();
        let ids: Vec<PairId> = answers.iter().map(|a| a.0).collect();
        let set = QuestionSet::from_pairs(&ids, battery.blocks()).ok_or_else(|| {
            Error::Invalid(format!("subject {id}: its {} answered questions match no question set", ids.len()))
        })?;
        subjects.push(SubjectRecord {
            id,
            question_set: set,
            pairs: answers.iter().map(|a| a.1).collect(),
            responses: answers.iter().map(|a| a.2).collect(),
        });
    }
    Ok(ChoiceDataset::new(battery.clone(), subjects)?)
}

pub fn load_choices(path: &Path, battery: &Battery) -> Result<ChoiceDataset> {
    read_choices(open(path)?, battery).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Line { line, msg } => Error::Invalid(format!("{}:{line}: {msg}", path.display())),
        Error::Invalid(msg) => Error::Invalid(format!("{}: {msg}", path.display())),
        other => other,
    }
}

pub fn write_choices<W: Write>(w: W, dataset: &ChoiceDataset) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(CHOICES_HEADER)?;
    let pairs = dataset.battery().pairs();
    for s in dataset.subjects() {
        for (&j, r) in s.pairs.iter().zip(&s.responses) {
            let id = pairs[j].id;
            wr.write_record([s.id.clone(), id.block.to_string(), id.question.to_string(), r.to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}

// ---- battery ----

pub fn write_battery<W: Write>(w: W, battery: &Battery) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(BATTERY_HEADER)?;
    for p in battery.pairs() {
        wr.write_record([
            p.id.block.to_string(),
            p.id.question.to_string(),
            p.p.to_string(),
            p.x_hi.to_string(),
            p.x_lo.to_string(),
            p.y_hi.to_string(),
            p.y_lo.to_string(),
            fmt_opt(p.threshold),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Rebuilds a battery from its export. Thresholds are recomputed for
/// `family` on `scan` and must agree with the file to 1e-6.
pub fn read_battery<R: Read>(r: R, family: UtilityFamily, scan: &GridSpec) -> Result<Battery> {
    let mut rd = reader(r);
    check_header(&mut rd, &BATTERY_HEADER)?;
    let mut blocks: Vec<[f64; 4]> = Vec::new();
    let mut seen: Vec<(PairId, Option<f64>, u64)> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let block: u8 = parse(&rec, 0, "block")?;
        let question: u8 = parse(&rec, 1, "question")?;
        let payoffs = [parse(&rec, 3, "x_hi")?, parse(&rec, 4, "x_lo")?, parse(&rec, 5, "y_hi")?, parse(&rec, 6, "y_lo")?];
        if block == 0 || question == 0 || question > QUESTIONS_PER_BLOCK {
            return Err(Error::Line { line, msg: format!("block {block} question {question} is out of range") });
        }
        let b = block as usize - 1;
        if b == blocks.len() {
            blocks.push(payoffs);
        } else if b > blocks.len() {
            return Err(Error::Line { line, msg: format!("block {block} appears before block {}", blocks.len() + 1) });
        } else if blocks[b] != payoffs {
            return Err(Error::Line { line, msg: format!("payoffs of block {block} differ from its first row") });
        }
        seen.push((PairId::new(block, question), parse_opt(&rec, 7, "threshold_gamma")?, line));
    }
    let battery = Battery::from_blocks(&blocks, family, scan)?;
    if seen.len() != battery.len() {
        return Err(Error::Invalid(format!("expected {} battery rows, found {}", battery.len(), seen.len())));
    }
    for (id, t, line) in seen {
        let j = battery.index_of(id).unwrap();
        let ok = match (t, battery.pairs()[j].threshold) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= 1e-6,
            _ => false,
        };
        if !ok {
            return Err(Error::Line { line, msg: format!("threshold of {id} does not match the recomputed value") });
        }
    }
    Ok(battery)
}

pub fn load_battery(path: &Path, family: UtilityFamily, scan: &GridSpec) -> Result<Battery> {
    read_battery(open(path)?, family, scan).map_err(|e| with_path(e, path))
}

// ---- premium curves ----

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub theta: f64,
    pub premium: f64,
    /// `CE(Y) - CE(X)`.
    pub ce_diff: Option<f64>,
    /// Contextual index of `Y` minus that of `X`.
    pub coneu_diff: Option<f64>,
}

pub fn write_curve<W: Write>(w: W, rows: &[CurveRow]) -> Result<()> {
    let mut wr = writer(w);
    let ce = rows.first().is_some_and(|r| r.ce_diff.is_some());
    let con = rows.first().is_some_and(|r| r.coneu_diff.is_some());
    let mut header = vec!["theta", "premium"];
    if ce {
        header.push("ce_diff");
    }
    if con {
        header.push("coneu_diff");
    }
    wr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.theta.to_string(), r.premium.to_string()];
        if ce {
            rec.push(fmt_opt(r.ce_diff));
        }
        if con {
            rec.push(fmt_opt(r.coneu_diff));
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_curve<R: Read>(r: R) -> Result<Vec<CurveRow>> {
    let mut rd = reader(r);
    check_header(&mut rd, &["theta", "premium"])?;
    let headers = rd.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (ce, con) = (col("ce_diff"), col("coneu_diff"));
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        out.push(CurveRow {
            theta: parse(&rec, 0, "theta")?,
            premium: parse(&rec, 1, "premium")?,
            ce_diff: ce.map(|i| parse_opt(&rec, i, "ce_diff")).transpose()?.flatten(),
            coneu_diff: con.map(|i| parse_opt(&rec, i, "coneu_diff")).transpose()?.flatten(),
        });
    }
    Ok(out)
}

// ---- fits ----

pub fn write_fit<W: Write>(w: W, estimates: &[Estimate]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(FIT_HEADER)?;
    for e in estimates {
        let flags: Vec<&str> = e.flags.iter().map(|f| f.name()).collect();
        wr.write_record([
            e.id.clone(),
            e.params.theta.to_string(),
            e.params.lambda.to_string(),
            e.params.kappa.to_string(),
            e.log_likelihood.to_string(),
            flags.join(";"),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_fit<R: Read>(r: R) -> Result<Vec<Estimate>> {
    let mut rd = reader(r);
    check_header(&mut rd, &FIT_HEADER)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let flags = field(&rec, 5, "flag")?
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<Flag>().map_err(|e| Error::Line { line, msg: e.to_string() }))
            .collect::<Result<Vec<_>>>()?;
        out.push(Estimate {
            id: field(&rec, 0, "subject_id")?.to_string(),
            params: ModelParams { theta: parse(&rec, 1, "gamma")?, lambda: parse(&rec, 2, "lambda")?, kappa: parse(&rec, 3, "kappa")? },
            log_likelihood: parse(&rec, 4, "loglik")?,
            flags,
        });
    }
    Ok(out)
}

/// True parameters of simulated subjects.
pub fn write_truth<W: Write>(w: W, rows: &[(String, ModelParams)]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(TRUTH_HEADER)?;
    for (id, p) in rows {
        wr.write_record([id.clone(), p.theta.to_string(), p.lambda.to_string(), p.kappa.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_truth<R: Read>(r: R) -> Result<Vec<(String, ModelParams)>> {
    let mut rd = reader(r);
    check_header(&mut rd, &TRUTH_HEADER)?;
    rd.records()
        .map(|rec| {
            let rec = rec?;
            Ok((
                field(&rec, 0, "subject_id")?.to_string(),
                ModelParams { theta: parse(&rec, 1, "gamma")?, lambda: parse(&rec, 2, "lambda")?, kappa: parse(&rec, 3, "kappa")? },
            ))
        })
        .collect()
}

// ---- summaries ----

/// One row of the pooled-estimates table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: String,
    pub gamma: Option<f64>,
    pub se_gamma: Option<f64>,
    pub lambda: f64,
    pub se_lambda: Option<f64>,
    pub kappa: f64,
    pub se_kappa: Option<f64>,
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow], header: bool) -> Result<()> {
    let mut wr = writer(w);
    if header {
        wr.write_record(SUMMARY_HEADER)?;
    }
    for r in rows {
        wr.write_record([
            r.model.clone(),
            fmt_opt(r.gamma),
            fmt_opt(r.se_gamma),
            r.lambda.to_string(),
            fmt_opt(r.se_lambda),
            r.kappa.to_string(),
            fmt_opt(r.se_kappa),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut rd = reader(r);
    check_header(&mut rd, &SUMMARY_HEADER)?;
    rd.records()
        .map(|rec| {
            let rec = rec?;
            Ok(SummaryRow {
                model: field(&rec, 0, "model")?.to_string(),
                gamma: parse_opt(&rec, 1, "gamma")?,
                se_gamma: parse_opt(&rec, 2, "se_gamma")?,
                lambda: parse(&rec, 3, "lambda")?,
                se_lambda: parse_opt(&rec, 4, "se_lambda")?,
                kappa: parse(&rec, 5, "kappa")?,
                se_kappa: parse_opt(&rec, 6, "se_kappa")?,
            })
        })
        .collect()
}

// ---- verdicts ----

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub pair_id: String,
    pub pi_ordered: bool,
    pub omega_ordered: bool,
    pub crossings: Vec<f64>,
    pub peak_theta: Option<f64>,
    pub peak_premium: Option<f64>,
}

impl VerdictRow {
    pub fn new(pair_id: impl Into<String>, v: &OrderVerdict) -> Self {
        VerdictRow {
            pair_id: pair_id.into(),
            pi_ordered: v.pi_ordered,
            omega_ordered: v.omega_ordered,
            crossings: v.crossings.clone(),
            peak_theta: v.peak_theta,
            peak_premium: v.peak_premium,
        }
    }
}

pub fn write_verdicts<W: Write>(w: W, rows: &[VerdictRow]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(VERDICT_HEADER)?;
    for r in rows {
        let crossings: Vec<String> = r.crossings.iter().map(|c| c.to_string()).collect();
        wr.write_record([
            r.pair_id.clone(),
            r.pi_ordered.to_string(),
            r.omega_ordered.to_string(),
            crossings.join(";"),
            fmt_opt(r.peak_theta),
            fmt_opt(r.peak_premium),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_verdicts<R: Read>(r: R) -> Result<Vec<VerdictRow>> {
    let mut rd = reader(r);
    check_header(&mut rd, &VERDICT_HEADER)?;
    rd.records()
        .map(|rec| {
            let rec = rec?;
            let line = line_of(&rec);
            let crossings = field(&rec, 3, "crossings")?
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| Error::Line { line, msg: format!("`{s}` is not a crossing") }))
                .collect::<Result<Vec<_>>>()?;
            Ok(VerdictRow {
                pair_id: field(&rec, 0, "pair_id")?.to_string(),
                pi_ordered: parse(&rec, 1, "pi_ordered")?,
                omega_ordered: parse(&rec, 2, "omega_ordered")?,
                crossings,
                peak_theta: parse_opt(&rec, 4, "peak_theta")?,
                peak_premium: parse_opt(&rec, 5, "peak_premium")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use pirum_core::andersen_battery;

    fn csv_of(rows: &[&str]) -> String {
        let mut s = CHOICES_HEADER.join(",");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s
    }

    #[test]
    fn full_subject_is_detected() {
        let b = andersen_battery();
        let rows: Vec<String> =
            (1..=4).flat_map(|bl| (1..=10).map(move |q| format!("s1,{bl},{q},{}", if q > 5 { "Y" } else { "X" }))).collect();
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let d = read_choices(csv_of(&refs).as_bytes(), &b).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.subjects()[0].question_set, QuestionSet::Full40);
    }

    #[test]
    fn subset_subject_is_detected() {
        let b = andersen_battery();
        let rows: Vec<String> =
            (1..=4).flat_map(|bl| [3, 5, 7, 8, 9, 10].map(|q| format!("7,{bl},{q},I"))).collect();
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let d = read_choices(csv_of(&refs).as_bytes(), &b).unwrap();
        assert_eq!(d.subjects()[0].question_set, QuestionSet::SubsetA);
    }

    #[test]
    fn bad_response_names_the_line() {
        let b = andersen_battery();
        let err = read_choices(csv_of(&["s1,1,1,X", "s1,1,2,Z"]).as_bytes(), &b).unwrap_err();
        match err {
            Error::Line { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains('Z'), "{msg}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_question_and_partial_coverage_are_rejected() {
        let b = andersen_battery();
        assert!(matches!(read_choices(csv_of(&["s1,5,1,X"]).as_bytes(), &b), Err(Error::Line { line: 2, .. })));
        assert!(matches!(read_choices(csv_of(&["s1,1,1,X"]).as_bytes(), &b), Err(Error::Invalid(_))));
    }

    #[test]
    fn battery_round_trip() {
        let b = andersen_battery();
        let mut buf = Vec::new();
        write_battery(&mut buf, &b).unwrap();
        let back = read_battery(buf.as_slice(), UtilityFamily::Crra, &GridSpec::default()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn verdict_and_summary_round_trip() {
        let rows = vec![VerdictRow {
            pair_id: "peaked".into(),
            pi_ordered: false,
            omega_ordered: true,
            crossings: vec![4.909_928_5],
            peak_theta: Some(5.992_87),
            peak_premium: Some(7.7e-4),
        }];
        let mut buf = Vec::new();
        write_verdicts(&mut buf, &rows).unwrap();
        assert_eq!(read_verdicts(buf.as_slice()).unwrap(), rows);

        let s = vec![SummaryRow { model: "pi".into(), gamma: Some(0.7), se_gamma: None, lambda: 0.003, se_lambda: Some(1e-4), kappa: 0.05, se_kappa: None }];
        let mut buf = Vec::new();
        write_summary(&mut buf, &s, true).unwrap();
        assert_eq!(read_summary(buf.as_slice()).unwrap(), s);
    }
}
