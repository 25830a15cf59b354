//! Published task-relationship tables, embedded verbatim.
//!
//! Directed tables store hundredths of a percent, row = trained with,
//! column = performance on. Affinity tables store the upper triangle in set
//! order; multi-task affinities in hundredths, transfer affinities in
//! thousandths.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::{AffinityMatrix, PairwiseRelationMatrix, Relation};
use crate::model::TaskSet;

/// Tasks of the first task set (settings 1 to 3).
pub const TASK_SET_1: [&str; 5] = ["SemSeg", "Depth", "Normals", "Keypoints", "Edges"];

/// Tasks of the second task set (setting 4).
pub const TASK_SET_2: [&str; 5] = ["AutoEnc", "Normals", "OccEdges", "Reshading", "Curvature"];

const NA: i32 = i32::MIN;

const SETTING1: [[i32; 5]; 5] = [
    [NA, -541, -1129, -432, -3464],
    [417, NA, -355, 349, 376],
    [850, 248, NA, 137, 1233],
    [482, 138, -2, NA, -526],
    [307, -92, -442, 137, NA],
];

const SETTING2: [[i32; 5]; 5] = [
    [NA, 300, -279, -520, 2780],
    [172, NA, 118, -352, 2573],
    [1081, 712, NA, 8898, 7159],
    [312, -41, -1012, NA, 6107],
    [3, -140, -478, -305, NA],
];

const SETTING3: [[i32; 5]; 5] = [
    [NA, 191, -600, -991, -2193],
    [-1263, NA, 295, 144, -970],
    [832, 1538, NA, -135, 5208],
    [-584, -721, -226, NA, 5563],
    [-562, 602, -416, -502, NA],
];

const SETTING4: [[i32; 5]; 5] = [
    [NA, -323, -266, 10, -139],
    [1931, NA, 316, 460, 195],
    [3583, -25, NA, 115, 84],
    [-2446, 371, 316, NA, 188],
    [1069, 261, 246, 315, NA],
];

const SETTING1_AFFINITY: [i32; 10] = [-62, -139, 25, -1578, -54, 243, 142, 67, 395, -195];

const TASKONOMY_TRANSFER: [i32; 10] = [1740, 1828, 723, 700, 1915, 406, 468, 89, 118, 232];

/// Printed margins of a directed table, in hundredths: row means, column
/// means and the overall mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrintedMargins {
    pub row_means: [i32; 5],
    pub column_means: [i32; 5],
    pub overall: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown fixture {0:?}")]
pub struct UnknownFixture(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fixture {
    Setting1Pairwise,
    Setting2Pairwise,
    Setting3Pairwise,
    Setting4Pairwise,
    TaskonomyTransfer,
    Setting1Affinity,
}

impl Fixture {
    pub const ALL: [Fixture; 6] = [
        Fixture::Setting1Pairwise,
        Fixture::Setting2Pairwise,
        Fixture::Setting3Pairwise,
        Fixture::Setting4Pairwise,
        Fixture::TaskonomyTransfer,
        Fixture::Setting1Affinity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Setting1Pairwise => "setting1_pairwise",
            Fixture::Setting2Pairwise => "setting2_pairwise",
            Fixture::Setting3Pairwise => "setting3_pairwise",
            Fixture::Setting4Pairwise => "setting4_pairwise",
            Fixture::TaskonomyTransfer => "taskonomy_transfer",
            Fixture::Setting1Affinity => "setting1_affinity",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Fixture::Setting1Pairwise => "pairwise relative performance, setting 1 (low capacity)",
            Fixture::Setting2Pairwise => "pairwise relative performance, setting 2 (high capacity)",
            Fixture::Setting3Pairwise => "pairwise relative performance, setting 3 (low data)",
            Fixture::Setting4Pairwise => "pairwise relative performance, setting 4 (task set 2)",
            Fixture::TaskonomyTransfer => "transfer-learning affinities, averaged over both directions",
            Fixture::Setting1Affinity => "multi-task affinities, setting 1 (printed)",
        }
    }

    fn directed(self) -> Option<&'static [[i32; 5]; 5]> {
        match self {
            Fixture::Setting1Pairwise => Some(&SETTING1),
            Fixture::Setting2Pairwise => Some(&SETTING2),
            Fixture::Setting3Pairwise => Some(&SETTING3),
            Fixture::Setting4Pairwise => Some(&SETTING4),
            _ => None,
        }
    }

    /// Raw stored integers in canonical order and their scale divisor.
    pub fn raw(self) -> (Vec<i32>, f64) {
        match self {
            Fixture::TaskonomyTransfer => (TASKONOMY_TRANSFER.to_vec(), 1000.0),
            Fixture::Setting1Affinity => (SETTING1_AFFINITY.to_vec(), 100.0),
            d => {
                let m = d.directed().expect("directed fixture");
                let v = m.iter().flatten().copied().filter(|&x| x != NA).collect();
                (v, 100.0)
            }
        }
    }

    pub fn tasks(self) -> &'static [&'static str; 5] {
        match self {
            Fixture::Setting4Pairwise => &TASK_SET_2,
            _ => &TASK_SET_1,
        }
    }

    pub fn printed_margins(self) -> Option<PrintedMargins> {
        let (row_means, column_means, overall) = match self {
            Fixture::Setting1Pairwise => ([-1392, 197, 617, 23, -23], [514, -62, -482, 48, -595], -115),
            Fixture::Setting2Pairwise => ([570, 628, 4462, 1342, -230], [392, 208, -413, 1930, 4654], 1354),
            Fixture::Setting3Pairwise => ([-898, -448, 1861, 1008, -220], [-395, 403, -237, -371, 1902], 260),
            Fixture::Setting4Pairwise => ([-179, 725, 939, -393, 473], [1034, 71, 153, 225, 82], 313),
            _ => return None,
        };
        Some(PrintedMargins {
            row_means,
            column_means,
            overall,
        })
    }

    pub fn load(self) -> Relation {
        let tasks = TaskSet::new(self.tasks().iter().copied()).expect("fixture tasks are valid");
        if let Some(m) = self.directed() {
            let mut out = PairwiseRelationMatrix::new(tasks.clone(), self.name());
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if v != NA {
                        out.insert(&tasks.as_slice()[i], &tasks.as_slice()[j], v as f64 / 100.0)
                            .expect("fixture entries are valid");
                    }
                }
            }
            return Relation::Directed(out);
        }
        let (values, scale) = self.raw();
        let mut out = AffinityMatrix::new(tasks.clone(), self.name());
        let mut it = values.into_iter();
        for i in 0..5 {
            for j in i + 1..5 {
                let v = it.next().expect("ten pairs");
                out.insert(&tasks.as_slice()[i], &tasks.as_slice()[j], v as f64 / scale)
                    .expect("fixture entries are valid");
            }
        }
        Relation::Affinity(out)
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fixture {
    type Err = UnknownFixture;

    /// Accepts the full names plus the short aliases `setting1`..`setting4`,
    /// `transfer` and `affinity`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = s.strip_prefix("fixtures:").unwrap_or(s);
        let fixture = match name {
            "setting1_pairwise" | "setting1" => Fixture::Setting1Pairwise,
            "setting2_pairwise" | "setting2" => Fixture::Setting2Pairwise,
            "setting3_pairwise" | "setting3" => Fixture::Setting3Pairwise,
            "setting4_pairwise" | "setting4" => Fixture::Setting4Pairwise,
            "taskonomy_transfer" | "transfer" => Fixture::TaskonomyTransfer,
            "setting1_affinity" | "affinity" => Fixture::Setting1Affinity,
            _ => return Err(UnknownFixture(s.to_string())),
        };
        Ok(fixture)
    }
}

pub fn load_fixture(name: &str) -> Result<Relation, UnknownFixture> {
    Ok(name.parse::<Fixture>()?.load())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checksum(v: &[i32]) -> (i64, i64) {
        let sum = v.iter().map(|&x| x as i64).sum();
        let weighted = v.iter().enumerate().map(|(i, &x)| (i as i64 + 1) * x as i64).sum();
        (sum, weighted)
    }

    #[test]
    fn checksums_match_printed_tables() {
        let expected = [
            (Fixture::Setting1Pairwise, 20, (-2309, 11545)),
            (Fixture::Setting2Pairwise, 20, (27088, 297988)),
            (Fixture::Setting3Pairwise, 20, (5210, 111098)),
            (Fixture::Setting4Pairwise, 20, (6261, 64209)),
            (Fixture::Setting1Affinity, 10, (-1156, -2254)),
            (Fixture::TaskonomyTransfer, 10, (8219, 29746)),
        ];
        for (f, n, sums) in expected {
            let (raw, _) = f.raw();
            assert_eq!(raw.len(), n, "{f}");
            assert_eq!(checksum(&raw), sums, "{f}");
        }
    }

    #[test]
    fn spot_values() {
        let Relation::Directed(s1) = load_fixture("setting1_pairwise").unwrap() else { panic!() };
        assert_eq!(s1.get("Normals", "Edges"), Some(12.33));
        assert_eq!(s1.get("SemSeg", "Depth"), Some(-5.41));
        let Relation::Affinity(tr) = load_fixture("taskonomy_transfer").unwrap() else { panic!() };
        assert_eq!(tr.get("SemSeg", "Depth"), Some(1.740));
        assert_eq!(tr.get("Depth", "SemSeg"), Some(1.740));
        let Relation::Directed(s4) = load_fixture("setting4_pairwise").unwrap() else { panic!() };
        assert_eq!(s4.get("Reshading", "AutoEnc"), Some(-24.46));
    }

    #[test]
    fn aliases_and_unknown_names() {
        assert_eq!("fixtures:setting1".parse::<Fixture>().unwrap(), Fixture::Setting1Pairwise);
        assert_eq!("fixtures:transfer".parse::<Fixture>().unwrap(), Fixture::TaskonomyTransfer);
        for f in Fixture::ALL {
            assert_eq!(f.name().parse::<Fixture>().unwrap(), f);
        }
        assert_eq!(load_fixture("setting9"), Err(UnknownFixture("setting9".into())));
    }
}
