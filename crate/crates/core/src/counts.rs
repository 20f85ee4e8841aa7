//! Coincidence tables: integer click counts per analyzer setting pair.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analyzer::{AnalyzerSetting, SettingPair};
use crate::error::{Error, Result};

/// Stokes detector (behind the Stokes PBS).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StokesDetector {
    D1,
    D2,
}

/// Anti-Stokes detector (behind the anti-Stokes PBS).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AntiStokesDetector {
    T1,
    T2,
}

impl StokesDetector {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl AntiStokesDetector {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Counts accumulated at one setting pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub d1t1: u64,
    pub d1t2: u64,
    pub d2t1: u64,
    pub d2t2: u64,
    /// Heralds registered on D1.
    pub n_d1: u64,
    /// Heralds registered on D2.
    pub n_d2: u64,
    /// Write–clean cycles run at this setting.
    pub trials: u64,
}

impl PairCounts {
    pub fn record(&mut self, herald: Option<StokesDetector>, readout: Option<AntiStokesDetector>) {
        self.trials += 1;
        let Some(d) = herald else { return };
        match d {
            StokesDetector::D1 => self.n_d1 += 1,
            StokesDetector::D2 => self.n_d2 += 1,
        }
        if let Some(t) = readout {
            match (d, t) {
                (StokesDetector::D1, AntiStokesDetector::T1) => self.d1t1 += 1,
                (StokesDetector::D1, AntiStokesDetector::T2) => self.d1t2 += 1,
                (StokesDetector::D2, AntiStokesDetector::T1) => self.d2t1 += 1,
                (StokesDetector::D2, AntiStokesDetector::T2) => self.d2t2 += 1,
            }
        }
    }

    pub fn merge(&mut self, other: &PairCounts) {
        self.d1t1 += other.d1t1;
        self.d1t2 += other.d1t2;
        self.d2t1 += other.d2t1;
        self.d2t2 += other.d2t2;
        self.n_d1 += other.n_d1;
        self.n_d2 += other.n_d2;
        self.trials += other.trials;
    }

    pub fn heralds(&self) -> u64 {
        self.n_d1 + self.n_d2
    }

    pub fn coincidences(&self) -> u64 {
        self.d1t1 + self.d1t2 + self.d2t1 + self.d2t2
    }

    /// Coincidences in `[D1T1, D1T2, D2T1, D2T2]` order, as floats.
    pub fn frequencies(&self) -> [f64; 4] {
        [self.d1t1, self.d1t2, self.d2t1, self.d2t2].map(|c| c as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.d1t1 + self.d1t2 <= self.n_d1
            && self.d2t1 + self.d2t2 <= self.n_d2
            && self.heralds() <= self.trials;
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "inconsistent counts (coincidences must not exceed singles, singles must not exceed trials): {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingCounts {
    pub settings: SettingPair,
    pub counts: PairCounts,
}

/// Counts for every measured setting pair, in measurement order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceTable {
    pub rows: Vec<SettingCounts>,
}

const ANGLE_MATCH_TOL: f64 = 1e-9;

fn same_setting(a: &AnalyzerSetting, b: &AnalyzerSetting) -> bool {
    match (a, b) {
        (AnalyzerSetting::Linear(x), AnalyzerSetting::Linear(y)) => {
            let d = (x - y).rem_euclid(180.0);
            d < ANGLE_MATCH_TOL || 180.0 - d < ANGLE_MATCH_TOL
        }
        (AnalyzerSetting::Circular, AnalyzerSetting::Circular) => true,
        _ => false,
    }
}

impl CoincidenceTable {
    pub fn with_settings(settings: &[SettingPair]) -> Self {
        Self {
            rows: settings
                .iter()
                .map(|&s| SettingCounts {
                    settings: s,
                    counts: PairCounts::default(),
                })
                .collect(),
        }
    }

    pub fn get(&self, pair: &SettingPair) -> Option<&PairCounts> {
        self.rows
            .iter()
            .find(|r| {
                same_setting(&r.settings.stokes, &pair.stokes)
                    && same_setting(&r.settings.anti_stokes, &pair.anti_stokes)
            })
            .map(|r| &r.counts)
    }

    /// Adds another table measured over the same setting list.
    pub fn merge(&mut self, other: &CoincidenceTable) -> Result<()> {
        if self.rows.len() != other.rows.len()
            || self.rows.iter().zip(&other.rows).any(|(a, b)| a.settings != b.settings)
        {
            return Err(Error::Input("cannot merge tables over different settings".into()));
        }
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.counts.merge(&b.counts);
        }
        Ok(())
    }

    pub fn total_trials(&self) -> u64 {
        self.rows.iter().map(|r| r.counts.trials).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.rows.iter().try_for_each(|r| r.counts.validate())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.rows {
            let c = r.counts;
            wtr.serialize(CsvRow {
                theta_s: r.settings.stokes.to_string(),
                theta_a: r.settings.anti_stokes.to_string(),
                c_d1t1: c.d1t1,
                c_d1t2: c.d1t2,
                c_d2t1: c.d2t1,
                c_d2t2: c.d2t2,
                n_d1: c.n_d1,
                n_d2: c.n_d2,
                n_total: c.trials,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Reads the CSV format produced by [`CoincidenceTable::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            let row: CsvRow = rec?;
            let settings = SettingPair::new(row.theta_s.parse()?, row.theta_a.parse()?);
            let counts = PairCounts {
                d1t1: row.c_d1t1,
                d1t2: row.c_d1t2,
                d2t1: row.c_d2t1,
                d2t2: row.c_d2t2,
                n_d1: row.n_d1,
                n_d2: row.n_d2,
                trials: row.n_total,
            };
            counts.validate()?;
            rows.push(SettingCounts { settings, counts });
        }
        Ok(Self { rows })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvRow {
    theta_s: String,
    theta_a: String,
    c_d1t1: u64,
    c_d1t2: u64,
    c_d2t1: u64,
    c_d2t2: u64,
    n_d1: u64,
    n_d2: u64,
    n_total: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_table() -> CoincidenceTable {
        let mut t = CoincidenceTable::with_settings(&[
            SettingPair::linear(0.0, 22.5),
            SettingPair::new(AnalyzerSetting::Circular, AnalyzerSetting::Linear(45.0)),
        ]);
        t.rows[0].counts = PairCounts {
            d1t1: 5,
            d1t2: 1,
            d2t1: 2,
            d2t2: 6,
            n_d1: 40,
            n_d2: 41,
            trials: 1000,
        };
        t
    }

    #[test]
    fn csv_header_and_rows() {
        let text = sample_table().to_csv_string().unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "theta_s,theta_a,c_d1t1,c_d1t2,c_d2t1,c_d2t2,n_d1,n_d2,n_total"
        );
        assert_eq!(lines.next().unwrap(), "0,22.5,5,1,2,6,40,41,1000");
        assert_eq!(lines.next().unwrap(), "R,45,0,0,0,0,0,0,0");
    }

    #[test]
    fn lookup_tolerates_equivalent_angles() {
        let t = sample_table();
        assert!(t.get(&SettingPair::linear(0.0, 22.5)).is_some());
        assert!(t.get(&SettingPair::linear(0.0, 22.5 + 1e-12)).is_some());
        assert!(t.get(&SettingPair::linear(0.0, 67.5)).is_none());
    }

    #[test]
    fn inconsistent_row_is_rejected() {
        let bad = "theta_s,theta_a,c_d1t1,c_d1t2,c_d2t1,c_d2t2,n_d1,n_d2,n_total\n0,0,10,0,0,0,5,0,100\n";
        assert!(CoincidenceTable::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn record_respects_count_hierarchy() {
        let mut c = PairCounts::default();
        c.record(None, None);
        c.record(Some(StokesDetector::D1), None);
        c.record(Some(StokesDetector::D2), Some(AntiStokesDetector::T2));
        assert_eq!(c.trials, 3);
        assert_eq!(c.heralds(), 2);
        assert_eq!(c.coincidences(), 1);
        c.validate().unwrap();
    }

    fn arb_counts() -> impl Strategy<Value = PairCounts> {
        (0u64..50, 0u64..50, 0u64..50, 0u64..50, 0u64..100, 0u64..100, 0u64..1000).prop_map(
            |(a, b, c, d, e, f, g)| PairCounts {
                d1t1: a,
                d1t2: b,
                d2t1: c,
                d2t2: d,
                n_d1: a + b + e,
                n_d2: c + d + f,
                trials: a + b + c + d + e + f + g,
            },
        )
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec((0.0f64..180.0, any::<bool>(), arb_counts()), 1..10)) {
            let table = CoincidenceTable {
                rows: rows.into_iter().map(|(a, circ, counts)| SettingCounts {
                    settings: SettingPair::new(
                        AnalyzerSetting::Linear(a),
                        if circ { AnalyzerSetting::Circular } else { AnalyzerSetting::Linear(a / 2.0) },
                    ),
                    counts,
                }).collect(),
            };
            let text = table.to_csv_string().unwrap();
            prop_assert_eq!(CoincidenceTable::read_csv(text.as_bytes()).unwrap(), table);
        }

        #[test]
        fn merge_is_commutative(a in arb_counts(), b in arb_counts()) {
            let mut x = a;
            x.merge(&b);
            let mut y = b;
            y.merge(&a);
            prop_assert_eq!(x, y);
            prop_assert!(x.validate().is_ok());
        }
    }
}
