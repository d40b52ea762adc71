//! Road-segment transition model and cluster cohesion probabilities (CCP).

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::rng::SeededRng;

/// Trips after which a vehicle's exit probabilities are fully trusted.
pub const CONFIDENCE_SATURATION_TRIPS: f64 = 20.0;

pub const STABLE_CCP_RANGE: (f64, f64) = (0.4, 0.8);
pub const UNSTABLE_CCP_RANGE: (f64, f64) = (0.2, 0.6);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("no observations")]
    NoObservations,
    #[error("unknown vehicle {0}")]
    UnknownVehicle(String),
    #[error("unknown segment {0}")]
    UnknownSegment(String),
    #[error("probability {0} outside [0,1]")]
    OutOfRange(f64),
    #[error("profile needs at least one node")]
    ZeroNodes,
    #[error("vehicle {0} already present")]
    DuplicateVehicle(String),
    #[error("row for {0} has no probability mass")]
    EmptyRow(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// One transition observed at an intersection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub vehicle_id: String,
    pub from_segment: String,
    pub to_segment: String,
}

impl Observation {
    pub fn new(vehicle: &str, from: &str, to: &str) -> Self {
        Self {
            vehicle_id: vehicle.into(),
            from_segment: from.into(),
            to_segment: to.into(),
        }
    }
}

/// Per-vehicle exit probabilities over road segments for a time window.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub vehicle_ids: Vec<String>,
    pub segment_ids: Vec<String>,
    /// `probs[v][s]`; every row sums to 1.
    pub probs: Vec<Vec<f64>>,
    pub confidence: Vec<f64>,
    pub window: (i64, i64),
}

/// A hand-entered row whose mass was not 1 before normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDiscrepancy {
    pub vehicle_id: String,
    pub original_sum: f64,
}

pub fn build_transition_matrix(
    observations: &[Observation],
    window: (i64, i64),
) -> Result<TransitionMatrix, MobilityError> {
    if observations.is_empty() {
        return Err(MobilityError::NoObservations);
    }
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut segments: BTreeMap<&str, ()> = BTreeMap::new();
    for o in observations {
        *counts
            .entry(&o.vehicle_id)
            .or_default()
            .entry(&o.to_segment)
            .or_default() += 1;
        segments.insert(&o.from_segment, ());
        segments.insert(&o.to_segment, ());
    }
    let segment_ids: Vec<String> = segments.keys().map(|s| s.to_string()).collect();

    let mut vehicle_ids = Vec::with_capacity(counts.len());
    let mut probs = Vec::with_capacity(counts.len());
    let mut confidence = Vec::with_capacity(counts.len());
    for (vehicle, row) in &counts {
        let total: usize = row.values().sum();
        vehicle_ids.push(vehicle.to_string());
        probs.push(
            segment_ids
                .iter()
                .map(|s| *row.get(s.as_str()).unwrap_or(&0) as f64 / total as f64)
                .collect(),
        );
        confidence.push((total as f64 / CONFIDENCE_SATURATION_TRIPS).min(1.0));
    }

    Ok(TransitionMatrix {
        vehicle_ids,
        segment_ids,
        probs,
        confidence,
        window,
    })
}

impl TransitionMatrix {
    /// Builds a matrix from hand-entered rows, normalising each row and
    /// reporting the ones whose mass was off.
    pub fn from_rows(
        vehicle_ids: Vec<String>,
        segment_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
        confidence: Vec<f64>,
        window: (i64, i64),
    ) -> Result<(Self, Vec<RowDiscrepancy>), MobilityError> {
        let mut flagged = Vec::new();
        let mut probs = Vec::with_capacity(rows.len());
        for (vid, row) in vehicle_ids.iter().zip(rows) {
            if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(MobilityError::OutOfRange(*bad));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(MobilityError::EmptyRow(vid.clone()));
            }
            if (sum - 1.0).abs() > 1e-9 {
                flagged.push(RowDiscrepancy {
                    vehicle_id: vid.clone(),
                    original_sum: sum,
                });
            }
            probs.push(row.into_iter().map(|p| p / sum).collect());
        }
        for c in &confidence {
            if !(0.0..=1.0).contains(c) {
                return Err(MobilityError::OutOfRange(*c));
            }
        }
        Ok((
            Self {
                vehicle_ids,
                segment_ids,
                probs,
                confidence,
                window,
            },
            flagged,
        ))
    }

    fn vehicle_index(&self, id: &str) -> Result<usize, MobilityError> {
        self.vehicle_ids
            .iter()
            .position(|v| v == id)
            .ok_or_else(|| MobilityError::UnknownVehicle(id.into()))
    }

    fn segment_index(&self, id: &str) -> Result<usize, MobilityError> {
        self.segment_ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| MobilityError::UnknownSegment(id.into()))
    }

    /// Probability that `vehicle_id` exits onto `target_segment`.
    pub fn ccp(&self, vehicle_id: &str, target_segment: &str) -> Result<f64, MobilityError> {
        let v = self.vehicle_index(vehicle_id)?;
        let s = self.segment_index(target_segment)?;
        Ok(self.probs[v][s])
    }

    pub fn row(&self, vehicle_id: &str) -> Result<&[f64], MobilityError> {
        Ok(&self.probs[self.vehicle_index(vehicle_id)?])
    }

    /// Adds a vehicle with no history: it gets the fleet-average row and
    /// zero confidence.
    pub fn with_unseen_vehicle(&self, vehicle_id: &str) -> Result<Self, MobilityError> {
        if self.vehicle_ids.iter().any(|v| v == vehicle_id) {
            return Err(MobilityError::DuplicateVehicle(vehicle_id.into()));
        }
        if self.probs.is_empty() {
            return Err(MobilityError::NoObservations);
        }
        let n = self.probs.len() as f64;
        let avg: Vec<f64> = (0..self.segment_ids.len())
            .map(|s| self.probs.iter().map(|r| r[s]).sum::<f64>() / n)
            .collect();
        let mut out = self.clone();
        out.vehicle_ids.push(vehicle_id.into());
        out.probs.push(avg);
        out.confidence.push(0.0);
        Ok(out)
    }

    /// Writes `vehicle_id,segment_id,probability,confidence` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MobilityError> {
        let csv_err = |e: csv::Error| MobilityError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vehicle_id", "segment_id", "probability", "confidence"])
            .map_err(csv_err)?;
        for (v, vid) in self.vehicle_ids.iter().enumerate() {
            for (s, sid) in self.segment_ids.iter().enumerate() {
                w.write_record([
                    vid.as_str(),
                    sid.as_str(),
                    &self.probs[v][s].to_string(),
                    &self.confidence[v].to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| MobilityError::Csv(e.to_string()))
    }
}

fn check_prob(p: f64) -> Result<f64, MobilityError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(MobilityError::OutOfRange(p))
    }
}

/// Probability that two vehicles both stay with the cluster.
pub type JointFn = fn(f64, f64) -> f64;

/// Joint CCP under independence.
pub fn independent_joint(p1: f64, p2: f64) -> f64 {
    p1 * p2
}

pub fn joint_ccp(p1: f64, p2: f64) -> Result<f64, MobilityError> {
    Ok(independent_joint(check_prob(p1)?, check_prob(p2)?))
}

/// `P(src = RS_j, dest = RS_k) = P(src = RS_j) * P(dest = RS_k)`
pub fn src_dest_probability(p_src: f64, p_dest: f64) -> Result<f64, MobilityError> {
    Ok(check_prob(p_src)? * check_prob(p_dest)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MobilityKind {
    Stable,
    Unstable,
}

impl MobilityKind {
    pub fn range(self) -> (f64, f64) {
        match self {
            MobilityKind::Stable => STABLE_CCP_RANGE,
            MobilityKind::Unstable => UNSTABLE_CCP_RANGE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MobilityKind::Stable => "stable",
            MobilityKind::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityProfile {
    pub kind: MobilityKind,
    pub ccp: Vec<f64>,
    pub window: (i64, i64),
}

/// Draws `n` per-node CCPs uniformly from the kind's interval. The same seed
/// consumes the same uniforms for either kind, so a stable profile is the
/// unstable one shifted up by 0.2.
pub fn sample_profile(
    kind: MobilityKind,
    n: usize,
    seed: u64,
) -> Result<MobilityProfile, MobilityError> {
    if n == 0 {
        return Err(MobilityError::ZeroNodes);
    }
    let (lo, hi) = kind.range();
    let mut rng = SeededRng::new(seed);
    let ccp = (0..n).map(|_| rng.uniform(lo, hi)).collect();
    Ok(MobilityProfile {
        kind,
        ccp,
        window: (0, 0),
    })
}

/// Node-indexed CCPs as seen by the placement cost model.
#[derive(Debug, Clone)]
pub struct ClusterMobility {
    ccp: Vec<f64>,
    joint: JointFn,
}

impl ClusterMobility {
    pub fn new(ccp: Vec<f64>) -> Self {
        Self {
            ccp,
            joint: independent_joint,
        }
    }

    /// Member CCPs from a profile with the control node pinned to 1: the
    /// cluster is defined relative to the CN, so it cannot leave it.
    pub fn anchored(profile: &MobilityProfile, cn: usize) -> Self {
        let mut ccp = profile.ccp.clone();
        if cn < ccp.len() {
            ccp[cn] = 1.0;
        }
        Self::new(ccp)
    }

    pub fn with_joint(mut self, joint: JointFn) -> Self {
        self.joint = joint;
        self
    }

    pub fn len(&self) -> usize {
        self.ccp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ccp.is_empty()
    }

    pub fn ccp(&self, node: usize) -> f64 {
        self.ccp[node]
    }

    pub fn values(&self) -> &[f64] {
        &self.ccp
    }

    pub fn joint(&self, a: usize, b: usize) -> f64 {
        (self.joint)(self.ccp[a], self.ccp[b])
    }
}
