//! Joint trajectories of external arms: CSV rows `stamp, q_1, .., q_m`.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct JointTrajectory {
    pub stamps: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

impl JointTrajectory {
    pub fn new(stamps: Vec<f64>, positions: Vec<Vec<f64>>) -> Result<Self> {
        if stamps.is_empty() || stamps.len() != positions.len() {
            return Err(Error::Config("trajectory needs one position row per stamp and at least one row".into()));
        }
        let dof = positions[0].len();
        if positions.iter().any(|p| p.len() != dof) {
            return Err(Error::Config("trajectory rows differ in length".into()));
        }
        if stamps.windows(2).any(|w| !(w[1] > w[0])) || stamps[0] < 0.0 {
            return Err(Error::Config("trajectory stamps must be non-negative and strictly increasing".into()));
        }
        Ok(Self { stamps, positions })
    }

    pub fn dof(&self) -> usize {
        self.positions[0].len()
    }

    pub fn duration(&self) -> f64 {
        *self.stamps.last().unwrap()
    }

    /// Parses CSV text; a first line starting with `stamp` is a header and
    /// lines starting with `#` are comments.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut stamps = Vec::new();
        let mut positions = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| Error::Syntax { location: format!("row {}", line + 1), message: e.to_string() })?;
            if line == 0 && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("stamp")) {
                continue;
            }
            let values = record
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Syntax { location: format!("row {}", line + 1), message: e.to_string() })?;
            if values.len() < 2 {
                return Err(Error::Syntax {
                    location: format!("row {}", line + 1),
                    message: "need a stamp and joint values".into(),
                });
            }
            stamps.push(values[0]);
            positions.push(values[1..].to_vec());
        }
        Self::new(stamps, positions)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stamp");
        for i in 0..self.dof() {
            out.push_str(&format!(",q{}", i + 1));
        }
        out.push('\n');
        for (t, q) in self.stamps.iter().zip(&self.positions) {
            out.push_str(&t.to_string());
            for v in q {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Linear interpolation; played repeatedly with period `duration()` once
    /// `t` runs past the last stamp. Exact rows are returned unchanged.
    pub fn sample(&self, t: f64) -> Vec<f64> {
        let end = self.duration();
        let t = if t > end && end > 0.0 { t % end } else { t };
        let k = self.stamps.partition_point(|s| *s <= t);
        if k == 0 {
            return self.positions[0].clone();
        }
        if k == self.stamps.len() {
            return self.positions[k - 1].clone();
        }
        let (t0, t1) = (self.stamps[k - 1], self.stamps[k]);
        let f = (t - t0) / (t1 - t0);
        if f == 0.0 {
            return self.positions[k - 1].clone();
        }
        self.positions[k - 1].iter().zip(&self.positions[k]).map(|(a, b)| a + f * (b - a)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_interpolate() {
        let t =
            JointTrajectory::parse_csv("stamp,q1,q2\n0.0, 0.0, 1.0\n# pause\n1.0, 1.0, 1.0\n2.0, 0.0, 1.0\n").unwrap();
        assert_eq!(t.dof(), 2);
        assert_eq!(t.sample(0.5), vec![0.5, 1.0]);
        assert_eq!(t.sample(1.0), vec![1.0, 1.0]);
        assert_eq!(t.sample(2.0), vec![0.0, 1.0]);
        // repeats
        assert_eq!(t.sample(2.5), vec![0.5, 1.0]);
        assert_eq!(t.sample(-1.0), vec![0.0, 1.0]);
    }

    #[test]
    fn round_trip() {
        let t = JointTrajectory::new(vec![0.0, 0.01], vec![vec![0.1, -0.2], vec![1.0 / 3.0, 2.0]]).unwrap();
        assert_eq!(JointTrajectory::parse_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn malformed() {
        assert!(JointTrajectory::parse_csv("0.0, abc\n").is_err());
        assert!(JointTrajectory::parse_csv("0.0, 1.0\n0.0, 2.0\n").is_err());
        assert!(JointTrajectory::parse_csv("0.0, 1.0\n1.0, 2.0, 3.0\n").is_err());
        assert!(JointTrajectory::parse_csv("").is_err());
    }
}
