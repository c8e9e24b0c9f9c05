use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sard::jet::GridJet;
use crate::sard::rank::RankVarietyProbe;
use crate::stats::linear_fit;

/// Slack on the dimension bounds above which a fit is flagged.
pub const BOUND_SLACK: f64 = 0.2;

/// Cube counts n(κ) at grid scales 2^{−κ} and the fitted slope of log₂ n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountCurve {
    pub dimension: usize,
    pub levels: Vec<u32>,
    pub counts: Vec<u64>,
    /// Levels entering the fit.
    pub window: Vec<u32>,
    /// Fitted slope clamped to [0, d].
    pub fitted_dim: f64,
    pub fit_se: f64,
    pub theory_bound: f64,
    /// Every count in the window is zero.
    pub empty_set: bool,
    /// fitted_dim > theory_bound + 0.2.
    pub exceeds_bound: bool,
}

impl BoxCountCurve {
    /// Unfitted curve; call [`dimension_fit`] to fill the estimate.
    pub fn new(dimension: usize, levels: Vec<u32>, counts: Vec<u64>, theory_bound: f64) -> Self {
        BoxCountCurve {
            dimension,
            levels,
            counts,
            window: Vec::new(),
            fitted_dim: f64::NAN,
            fit_se: f64::NAN,
            theory_bound,
            empty_set: false,
            exceeds_bound: false,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,count\n");
        for (l, c) in self.levels.iter().zip(&self.counts) {
            s.push_str(&format!("{l},{c}\n"));
        }
        s
    }
}

/// Largest level with at least four samples per cube side.
pub fn finest_level(resolution: usize) -> Result<u32> {
    if resolution < 4 {
        return Err(Error::Input(format!("N = {resolution} admits no cube level")));
    }
    Ok((resolution / 4).trailing_zeros())
}

fn check_level(resolution: usize, level: u32) -> Result<()> {
    let finest = finest_level(resolution)?;
    if level > finest {
        return Err(Error::Input(format!(
            "level {level} is too fine for N = {resolution}; the finest admissible level is {finest}"
        )));
    }
    Ok(())
}

/// Counts cubes of side 2^{−level} whose centre Jacobian lies within the
/// probe threshold of the rank ≤ k variety.
pub fn critical_cube_count(jet: &GridJet, probe: &RankVarietyProbe, level: u32) -> Result<u64> {
    check_probe(jet, probe)?;
    check_level(jet.resolution(), level)?;
    let dist = jet.low_rank_distances(probe.rank_bound);
    Ok(count_cubes(jet, &dist, probe.threshold(level), level))
}

fn check_probe(jet: &GridJet, probe: &RankVarietyProbe) -> Result<()> {
    if probe.dimension != jet.dimension() {
        return Err(Error::Shape(format!(
            "probe is for dimension {}, jet lives in dimension {}",
            probe.dimension,
            jet.dimension()
        )));
    }
    Ok(())
}

fn count_cubes(jet: &GridJet, dist: &[f64], threshold: f64, level: u32) -> u64 {
    let n = jet.resolution();
    let d = jet.dimension();
    let lat = jet.phi().lattice();
    let per_axis = 1usize << level;
    // cube centres (2i + 1)/2^{level+1} are grid points because 2^{level+1} ≤ N
    let step = n / (2 * per_axis);
    let mut count = 0;
    let mut idx = vec![0usize; d];
    for cube in 0..per_axis.pow(d as u32) {
        let mut rem = cube;
        for a in (0..d).rev() {
            idx[a] = (2 * (rem % per_axis) + 1) * step;
            rem /= per_axis;
        }
        if dist[lat.flat(&idx)] <= threshold {
            count += 1;
        }
    }
    count
}

/// Counts at every level, then fits the dimension.
pub fn box_count_curve(jet: &GridJet, probe: &RankVarietyProbe, levels: &[u32]) -> Result<BoxCountCurve> {
    check_probe(jet, probe)?;
    for &l in levels {
        check_level(jet.resolution(), l)?;
    }
    let dist = jet.low_rank_distances(probe.rank_bound);
    let counts = levels
        .iter()
        .map(|&l| count_cubes(jet, &dist, probe.threshold(l), l))
        .collect();
    dimension_fit(BoxCountCurve::new(jet.dimension(), levels.to_vec(), counts, probe.domain_bound()))
}

/// Levels used in the fit: drop the two coarsest and the finest when at
/// least three remain, otherwise only the coarsest.
fn fit_window(levels: &[u32]) -> std::ops::Range<usize> {
    let m = levels.len();
    if m >= 6 {
        2..m - 1
    } else {
        1..m
    }
}

/// Least-squares slope of log₂ n(κ) against κ over the fit window.
pub fn dimension_fit(mut curve: BoxCountCurve) -> Result<BoxCountCurve> {
    if curve.levels.len() != curve.counts.len() {
        return Err(Error::Input("levels and counts differ in length".into()));
    }
    if curve.levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Input("levels must be strictly increasing".into()));
    }
    if curve.counts.iter().all(|&c| c == 0) {
        curve.window = curve.levels.clone();
        curve.fitted_dim = 0.0;
        curve.fit_se = 0.0;
        curve.empty_set = true;
        curve.exceeds_bound = false;
        return Ok(curve);
    }
    if curve.levels.len() < 4 {
        return Err(Error::Input(format!(
            "a dimension fit needs at least 4 levels, got {}",
            curve.levels.len()
        )));
    }
    let range = fit_window(&curve.levels);
    curve.window = curve.levels[range.clone()].to_vec();
    let (xs, ys): (Vec<f64>, Vec<f64>) = range
        .filter(|&i| curve.counts[i] > 0)
        .map(|i| (curve.levels[i] as f64, (curve.counts[i] as f64).log2()))
        .unzip();
    match linear_fit(&xs, &ys) {
        Some(fit) => {
            curve.fitted_dim = fit.slope.clamp(0.0, curve.dimension as f64);
            curve.fit_se = fit.slope_se;
            curve.empty_set = false;
        }
        None => {
            // fewer than two nonzero counts: the set vanishes at fine scales
            curve.fitted_dim = 0.0;
            curve.fit_se = f64::NAN;
            curve.empty_set = xs.is_empty();
        }
    }
    curve.exceeds_bound = curve.fitted_dim > curve.theory_bound + BOUND_SLACK;
    Ok(curve)
}

/// Grid points whose Jacobian is within the threshold of `level`.
pub fn critical_points(jet: &GridJet, probe: &RankVarietyProbe, level: u32) -> Result<Vec<usize>> {
    check_probe(jet, probe)?;
    check_level(jet.resolution(), level)?;
    let t = probe.threshold(level);
    Ok(jet
        .low_rank_distances(probe.rank_bound)
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= t)
        .map(|(i, _)| i)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageDimension {
    pub domain: BoxCountCurve,
    pub levels: Vec<u32>,
    pub counts: Vec<u64>,
    pub fitted_dim: f64,
    /// (domain fitted_dim + α·k)/(1 + α).
    pub bound: f64,
    pub empty_set: bool,
    /// fitted_dim > bound + 0.2.
    pub exceeds_bound: bool,
}

impl ImageDimension {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,count\n");
        for (l, c) in self.levels.iter().zip(&self.counts) {
            s.push_str(&format!("{l},{c}\n"));
        }
        s
    }
}

/// Box-counts φ over the grid points flagged critical at the finest
/// requested level. Range boxes have side E·2^{−κ} with E the largest
/// component range of φ over the torus.
pub fn image_dimension_estimate(jet: &GridJet, probe: &RankVarietyProbe, levels: &[u32]) -> Result<ImageDimension> {
    let domain = box_count_curve(jet, probe, levels)?;
    let finest = *levels
        .iter()
        .max()
        .ok_or_else(|| Error::Input("no levels given".into()))?;
    let pts = critical_points(jet, probe, finest)?;
    let bound = probe.image_bound(domain.fitted_dim);
    let rows = jet.range_dimension();
    let mut lo = vec![f64::INFINITY; rows];
    let mut extent: f64 = 0.0;
    for r in 0..rows {
        let c = jet.phi().real_component(r);
        let mn = c.iter().copied().fold(f64::INFINITY, f64::min);
        let mx = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo[r] = mn;
        extent = extent.max(mx - mn);
    }
    if extent == 0.0 {
        extent = 1.0;
    }
    let values: Vec<Vec<f64>> = pts.iter().map(|&p| jet.value_at(p)).collect();
    let counts: Vec<u64> = levels
        .iter()
        .map(|&l| {
            let side = extent * 0.5f64.powi(l as i32);
            let boxes: HashSet<Vec<i64>> = values
                .iter()
                .map(|y| y.iter().zip(&lo).map(|(v, m)| ((v - m) / side).floor() as i64).collect())
                .collect();
            boxes.len() as u64
        })
        .collect();
    let mut curve = BoxCountCurve::new(rows, levels.to_vec(), counts.clone(), bound);
    if pts.is_empty() {
        curve.empty_set = true;
        curve.fitted_dim = 0.0;
    } else {
        curve = dimension_fit(curve)?;
    }
    let fitted_dim = curve.fitted_dim;
    Ok(ImageDimension {
        domain,
        levels: levels.to_vec(),
        counts,
        fitted_dim,
        bound,
        empty_set: pts.is_empty(),
        exceeds_bound: fitted_dim > bound + BOUND_SLACK,
    })
}
