//! Indicator samples: schema, CSV ingestion, min-max normalisation and the
//! warning-level mapping of network scores.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a larger raw indicator value means a safer (benefit) or a more
/// dangerous (cost) situation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Benefit,
    Cost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indicator {
    pub code: String,
    pub name: String,
    pub orientation: Orientation,
}

/// Ordered list of indicators making up one input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorSchema {
    indicators: Vec<Indicator>,
}

const STANDARD_INDICATORS: [(&str, &str); 19] = [
    ("X11", "Security inspections"),
    ("X12", "Training status"),
    ("X13", "Technical staff capacity"),
    ("X14", "Years of experience"),
    ("X15", "Educational attainment"),
    ("X21", "Equipment mechanization level"),
    ("X22", "Equipment in good condition"),
    ("X23", "Firefighting equipment integrity rate"),
    ("X24", "Automation level of safety monitoring equipment"),
    ("X31", "Coal dust prevention and control"),
    ("X32", "Roof prevention and control"),
    ("X33", "Gas prevention and control"),
    ("X34", "Fire prevention and control"),
    ("X35", "Flood prevention and control"),
    ("X41", "Hidden danger inspection pass rate"),
    ("X42", "Implementation of security management"),
    ("X43", "Security inspections (management)"),
    ("X44", "Degree of commitment to security"),
    ("X45", "Monthly safety training"),
];

impl IndicatorSchema {
    /// The 19 coal-mine safety indicators grouped as personnel (X1x), objects
    /// (X2x), working environment (X3x) and organisation (X4x). Every
    /// indicator defaults to [`Orientation::Benefit`].
    pub fn standard() -> Self {
        let indicators = STANDARD_INDICATORS
            .iter()
            .map(|&(code, name)| Indicator {
                code: code.to_string(),
                name: name.to_string(),
                orientation: Orientation::Benefit,
            })
            .collect();
        Self { indicators }
    }

    pub fn new(indicators: Vec<Indicator>) -> Result<Self> {
        if indicators.is_empty() {
            return Err(Error::Config("schema has no indicators".into()));
        }
        for (i, a) in indicators.iter().enumerate() {
            if indicators[..i].iter().any(|b| b.code == a.code) {
                return Err(Error::Config(format!(
                    "duplicate indicator code {}",
                    a.code
                )));
            }
        }
        Ok(Self { indicators })
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }

    pub fn indicators(&self) -> &[Indicator] {
        &self.indicators
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.indicators.iter().map(|i| i.code.as_str())
    }

    pub fn orientations(&self) -> Vec<Orientation> {
        self.indicators.iter().map(|i| i.orientation).collect()
    }

    pub fn set_orientation(&mut self, code: &str, orientation: Orientation) -> Result<()> {
        let ind = self
            .indicators
            .iter_mut()
            .find(|i| i.code.eq_ignore_ascii_case(code))
            .ok_or_else(|| Error::Config(format!("unknown indicator code {code}")))?;
        ind.orientation = orientation;
        Ok(())
    }

    /// Replaces every orientation flag, in schema order.
    pub fn with_orientations(mut self, orientations: &[Orientation]) -> Result<Self> {
        if orientations.len() != self.len() {
            return Err(Error::Dimension {
                what: "orientation flags",
                expected: self.len(),
                found: orientations.len(),
            });
        }
        for (ind, &o) in self.indicators.iter_mut().zip(orientations) {
            ind.orientation = o;
        }
        Ok(self)
    }
}

impl Default for IndicatorSchema {
    fn default() -> Self {
        Self::standard()
    }
}

/// One input row and, for labelled data, its target outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Empty for unlabelled samples.
    pub targets: Vec<f64>,
}

impl Sample {
    pub fn unlabeled(features: Vec<f64>) -> Self {
        Self {
            features,
            targets: Vec::new(),
        }
    }

    pub fn labeled(features: Vec<f64>, target: f64) -> Self {
        Self {
            features,
            targets: vec![target],
        }
    }

    pub fn with_targets(features: Vec<f64>, targets: Vec<f64>) -> Self {
        Self { features, targets }
    }

    /// The scalar target of a single-output sample.
    pub fn target(&self) -> Option<f64> {
        self.targets.first().copied()
    }

    pub fn has_target(&self) -> bool {
        !self.targets.is_empty()
    }
}

/// Reads a comma-separated sample file. See [`parse_samples`].
pub fn load_samples(
    path: &Path,
    schema: &IndicatorSchema,
    has_target: bool,
) -> Result<Vec<Sample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_samples(file, schema, has_target)
}

/// Parses comma-separated samples: an optional header row naming the
/// indicator codes (plus `y`), then one sample per row. Row numbers in
/// errors are 1-based file lines; column numbers are 1-based fields.
pub fn parse_samples<R: Read>(
    reader: R,
    schema: &IndicatorSchema,
    has_target: bool,
) -> Result<Vec<Sample>> {
    let expected = schema.len() + usize::from(has_target);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut samples = Vec::new();
    for (index, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let row = record.position().map_or(index + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if index == 0 && looks_like_header(&record) {
            check_header(&record, schema, has_target, row)?;
            continue;
        }
        if record.len() != expected {
            return Err(Error::ColumnCount {
                row,
                expected,
                found: record.len(),
            });
        }
        let mut values = Vec::with_capacity(expected);
        for (col, field) in record.iter().enumerate() {
            let v = f64::from_str(field).map_err(|_| Error::NotNumeric {
                row,
                column: col + 1,
                value: field.to_string(),
            })?;
            values.push(v);
        }
        let targets = values.split_off(schema.len());
        samples.push(Sample::with_targets(values, targets));
    }
    Ok(samples)
}

fn looks_like_header(record: &csv::StringRecord) -> bool {
    record
        .get(0)
        .is_some_and(|f| f.parse::<f64>().is_err() && f.starts_with(['X', 'x']))
}

fn check_header(
    record: &csv::StringRecord,
    schema: &IndicatorSchema,
    has_target: bool,
    row: usize,
) -> Result<()> {
    let expected = schema.len() + usize::from(has_target);
    if record.len() != expected {
        return Err(Error::ColumnCount {
            row,
            expected,
            found: record.len(),
        });
    }
    for (col, (field, code)) in record.iter().zip(schema.codes()).enumerate() {
        if !field.eq_ignore_ascii_case(code) {
            return Err(Error::Csv(format!(
                "row {row}, column {}: header `{field}` where `{code}` was expected",
                col + 1
            )));
        }
    }
    Ok(())
}

/// Writes samples in the format read by [`parse_samples`], header included.
/// Reals use the shortest representation that parses back to the same bits.
pub fn write_samples<W: Write>(
    mut out: W,
    schema: &IndicatorSchema,
    samples: &[Sample],
    with_target: bool,
) -> Result<()> {
    let mut header: Vec<&str> = schema.codes().collect();
    if with_target {
        header.push("y");
    }
    let io = |e| Error::io("<output>", e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for s in samples {
        let line: Vec<String> = s
            .features
            .iter()
            .chain(if with_target { &s.targets[..] } else { &[] })
            .map(|v| v.to_string())
            .collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub x_min: f64,
    pub x_max: f64,
    pub orientation: Orientation,
}

impl ColumnStats {
    pub fn transform(&self, x: f64) -> f64 {
        let range = self.x_max - self.x_min;
        if range == 0.0 {
            return 0.5;
        }
        let v = match self.orientation {
            Orientation::Benefit => (x - self.x_min) / range,
            Orientation::Cost => (self.x_max - x) / range,
        };
        v.clamp(0.0, 1.0)
    }
}

/// Per-column min/max recorded from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub columns: Vec<ColumnStats>,
}

impl NormStats {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn apply_all(&self, raw: &[Sample]) -> Result<Vec<Sample>> {
        raw.iter().map(|s| apply_normalization(self, s)).collect()
    }
}

pub fn fit_normalization(raw: &[Sample], schema: &IndicatorSchema) -> Result<NormStats> {
    if raw.is_empty() {
        return Err(Error::Empty);
    }
    let mut columns: Vec<ColumnStats> = schema
        .indicators()
        .iter()
        .map(|ind| ColumnStats {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            orientation: ind.orientation,
        })
        .collect();
    for s in raw {
        check_width(s, columns.len())?;
        for (c, &x) in columns.iter_mut().zip(&s.features) {
            if !x.is_finite() {
                return Err(Error::NonFinite("raw feature"));
            }
            c.x_min = c.x_min.min(x);
            c.x_max = c.x_max.max(x);
        }
    }
    Ok(NormStats { columns })
}

/// Maps each feature into `[0, 1]`. Degenerate columns map to 0.5 and values
/// outside the fitted range are clamped. Targets pass through untouched.
pub fn apply_normalization(stats: &NormStats, raw: &Sample) -> Result<Sample> {
    check_width(raw, stats.len())?;
    let features = stats
        .columns
        .iter()
        .zip(&raw.features)
        .map(|(c, &x)| c.transform(x))
        .collect();
    Ok(Sample::with_targets(features, raw.targets.clone()))
}

fn check_width(s: &Sample, expected: usize) -> Result<()> {
    if s.features.len() != expected {
        return Err(Error::Dimension {
            what: "sample features",
            expected,
            found: s.features.len(),
        });
    }
    Ok(())
}

/// Risk severity. Ordered so that `High > Higher > Medium > Lower > Low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarningLevel {
    Low,
    Lower,
    Medium,
    Higher,
    High,
}

impl WarningLevel {
    pub const ALL: [WarningLevel; 5] = [
        WarningLevel::High,
        WarningLevel::Higher,
        WarningLevel::Medium,
        WarningLevel::Lower,
        WarningLevel::Low,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WarningLevel::High => "high",
            WarningLevel::Higher => "higher",
            WarningLevel::Medium => "medium",
            WarningLevel::Lower => "lower",
            WarningLevel::Low => "low",
        }
    }
}

impl fmt::Display for WarningLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Equal-width bins on the clamped score; a higher score means a safer state.
/// NaN is treated as the most severe level.
pub fn classify_warning(score: f64) -> WarningLevel {
    if score.is_nan() {
        return WarningLevel::High;
    }
    let s = score.clamp(0.0, 1.0);
    if s < 0.2 {
        WarningLevel::High
    } else if s < 0.4 {
        WarningLevel::Higher
    } else if s < 0.6 {
        WarningLevel::Medium
    } else if s < 0.8 {
        WarningLevel::Lower
    } else {
        WarningLevel::Low
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_column(orientation: Orientation) -> IndicatorSchema {
        IndicatorSchema::new(vec![Indicator {
            code: "A".into(),
            name: "a".into(),
            orientation,
        }])
        .unwrap()
    }

    fn rows(values: &[f64]) -> Vec<Sample> {
        values.iter().map(|&v| Sample::unlabeled(vec![v])).collect()
    }

    #[test]
    fn standard_schema_order() {
        let s = IndicatorSchema::standard();
        assert_eq!(s.len(), 19);
        let codes: Vec<_> = s.codes().collect();
        assert_eq!(codes[0], "X11");
        assert_eq!(codes[4], "X15");
        assert_eq!(codes[5], "X21");
        assert_eq!(codes[9], "X31");
        assert_eq!(codes[14], "X41");
        assert_eq!(codes[18], "X45");
        assert!(s
            .indicators()
            .iter()
            .all(|i| i.orientation == Orientation::Benefit));
    }

    #[test]
    fn duplicate_codes_rejected() {
        let ind = Indicator {
            code: "A".into(),
            name: "a".into(),
            orientation: Orientation::Benefit,
        };
        assert!(IndicatorSchema::new(vec![ind.clone(), ind]).is_err());
    }

    #[test]
    fn parse_three_rows_in_order() {
        let schema = one_column(Orientation::Benefit);
        let got = parse_samples("1,0.5\n2,0.25\n3,1\n".as_bytes(), &schema, true).unwrap();
        assert_eq!(got.len(), 3);
        assert_eq!(got[0].features, vec![1.0]);
        assert_eq!(got[2].target(), Some(1.0));
    }

    #[test]
    fn short_row_names_row() {
        let schema = IndicatorSchema::standard();
        let short = vec!["0.1"; 18].join(",");
        let full = vec!["0.1"; 19].join(",");
        let text = format!("{full}\n{short}\n");
        match parse_samples(text.as_bytes(), &schema, false) {
            Err(Error::ColumnCount {
                row,
                expected,
                found,
            }) => {
                assert_eq!((row, expected, found), (2, 19, 18));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_reports_row_and_column() {
        let schema = one_column(Orientation::Benefit);
        match parse_samples("1,0.5\n2,abc\n".as_bytes(), &schema, true) {
            Err(Error::NotNumeric { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_and_crlf_accepted() {
        let schema = IndicatorSchema::standard();
        let mut header: Vec<String> = schema.codes().map(String::from).collect();
        header.push("y".into());
        let row = vec!["0.5"; 20].join(",");
        let text = format!("{}\r\n{row}\r\n", header.join(","));
        let got = parse_samples(text.as_bytes(), &schema, true).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].target(), Some(0.5));
    }

    #[test]
    fn wrong_header_rejected() {
        let schema = one_column(Orientation::Benefit);
        // Header detection only fires on X-prefixed first fields.
        assert!(parse_samples("X99\n1\n".as_bytes(), &schema, false).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_samples(
            Path::new("/nonexistent/data.csv"),
            &IndicatorSchema::standard(),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/data.csv"));
    }

    #[test]
    fn fit_min_max() {
        let schema = one_column(Orientation::Benefit);
        let stats = fit_normalization(&rows(&[2.0, 4.0, 6.0]), &schema).unwrap();
        assert_eq!((stats.columns[0].x_min, stats.columns[0].x_max), (2.0, 6.0));
        let stats = fit_normalization(&rows(&[3.5]), &schema).unwrap();
        assert_eq!((stats.columns[0].x_min, stats.columns[0].x_max), (3.5, 3.5));
        assert!(matches!(fit_normalization(&[], &schema), Err(Error::Empty)));
    }

    #[test]
    fn fit_columns_independent() {
        let schema = IndicatorSchema::new(vec![
            Indicator {
                code: "A".into(),
                name: String::new(),
                orientation: Orientation::Benefit,
            },
            Indicator {
                code: "B".into(),
                name: String::new(),
                orientation: Orientation::Cost,
            },
        ])
        .unwrap();
        let raw = vec![
            Sample::unlabeled(vec![0.0, 5.0]),
            Sample::unlabeled(vec![10.0, 5.0]),
        ];
        let stats = fit_normalization(&raw, &schema).unwrap();
        assert_eq!(
            (stats.columns[0].x_min, stats.columns[0].x_max),
            (0.0, 10.0)
        );
        assert_eq!((stats.columns[1].x_min, stats.columns[1].x_max), (5.0, 5.0));
        assert_eq!(stats.columns[1].orientation, Orientation::Cost);
    }

    #[test]
    fn benefit_cost_and_degenerate_maps() {
        let norm = |o, lo, hi, x| {
            let stats = NormStats {
                columns: vec![ColumnStats {
                    x_min: lo,
                    x_max: hi,
                    orientation: o,
                }],
            };
            apply_normalization(&stats, &Sample::unlabeled(vec![x]))
                .unwrap()
                .features[0]
        };
        let b: Vec<f64> = [2.0, 4.0, 6.0]
            .iter()
            .map(|&x| norm(Orientation::Benefit, 2.0, 6.0, x))
            .collect();
        assert_eq!(b, vec![0.0, 0.5, 1.0]);
        let c: Vec<f64> = [2.0, 4.0, 6.0]
            .iter()
            .map(|&x| norm(Orientation::Cost, 2.0, 6.0, x))
            .collect();
        assert_eq!(c, vec![1.0, 0.5, 0.0]);
        assert_eq!(norm(Orientation::Benefit, 5.0, 5.0, 5.0), 0.5);
        assert_eq!(norm(Orientation::Benefit, 2.0, 6.0, 9.0), 1.0);
        assert_eq!(norm(Orientation::Cost, 2.0, 6.0, 9.0), 0.0);
    }

    #[test]
    fn apply_rejects_wrong_width() {
        let stats = NormStats { columns: vec![] };
        assert!(matches!(
            apply_normalization(&stats, &Sample::unlabeled(vec![1.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn warning_bins() {
        assert_eq!(classify_warning(0.0), WarningLevel::High);
        assert_eq!(classify_warning(0.5), WarningLevel::Medium);
        assert_eq!(classify_warning(1.0), WarningLevel::Low);
        assert_eq!(classify_warning(0.2), WarningLevel::Higher);
        assert_eq!(classify_warning(0.7999), WarningLevel::Lower);
        assert_eq!(classify_warning(-3.0), WarningLevel::High);
        assert_eq!(classify_warning(7.0), WarningLevel::Low);
        assert!(WarningLevel::High > WarningLevel::Higher);
        assert!(WarningLevel::Lower > WarningLevel::Low);
    }

    proptest! {
        #[test]
        fn normalized_values_in_unit_interval(
            lo in -1e6f64..1e6, span in 0.0f64..1e6, x in -1e7f64..1e7, cost in any::<bool>()
        ) {
            let o = if cost { Orientation::Cost } else { Orientation::Benefit };
            let c = ColumnStats { x_min: lo, x_max: lo + span, orientation: o };
            let v = c.transform(x);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn column_extremes_map_to_ends(values in prop::collection::vec(-1e3f64..1e3, 2..20)) {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(hi > lo);
            for (o, at_min, at_max) in [(Orientation::Benefit, 0.0, 1.0), (Orientation::Cost, 1.0, 0.0)] {
                let schema = one_column(o);
                let stats = fit_normalization(&rows(&values), &schema).unwrap();
                prop_assert_eq!(stats.columns[0].transform(lo), at_min);
                prop_assert_eq!(stats.columns[0].transform(hi), at_max);
            }
        }

        #[test]
        fn renormalizing_is_idempotent(values in prop::collection::vec(-1e3f64..1e3, 2..20)) {
            // Normalised data is benefit-oriented whatever the raw orientation.
            let schema = one_column(Orientation::Benefit);
            let raw = rows(&values);
            let once = fit_normalization(&raw, &schema).unwrap().apply_all(&raw).unwrap();
            let stats = fit_normalization(&once, &schema).unwrap();
            prop_assume!(stats.columns[0].x_max > stats.columns[0].x_min);
            let twice = stats.apply_all(&once).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a.features[0] - b.features[0]).abs() <= 1e-12);
            }
        }

        #[test]
        fn warning_monotone(a in -1.0f64..2.0, b in -1.0f64..2.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(classify_warning(hi) <= classify_warning(lo));
        }

        #[test]
        fn write_then_parse_reproduces_values(
            data in prop::collection::vec((prop::collection::vec(-1e3f64..1e3, 19), 0.0f64..1.0), 0..6)
        ) {
            let schema = IndicatorSchema::standard();
            let samples: Vec<Sample> = data.into_iter().map(|(f, y)| Sample::labeled(f, y)).collect();
            let mut buf = Vec::new();
            write_samples(&mut buf, &schema, &samples, true).unwrap();
            let back = parse_samples(&buf[..], &schema, true).unwrap();
            prop_assert_eq!(back, samples);
        }
    }
}
