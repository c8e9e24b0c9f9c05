use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sard::boxcount::{critical_points, finest_level};
use crate::sard::jet::GridJet;
use crate::sard::rank::RankVarietyProbe;
use crate::stats::linear_fit;

fn check_width(w: f64) -> Result<()> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::Domain(format!("bin width {w} outside (0, 1)")));
    }
    Ok(())
}

/// Masses of the φ-image of the critical grid points, binned on the
/// lattice w·ℤ^{d−1}. Each grid point carries 1/N^d.
fn binned_masses(jet: &GridJet, pts: &[usize], width: f64) -> HashMap<Vec<i64>, f64> {
    let unit = 1.0 / jet.points() as f64;
    let mut bins: HashMap<Vec<i64>, f64> = HashMap::new();
    for &p in pts {
        let key = jet.value_at(p).iter().map(|y| (y / width).floor() as i64).collect();
        *bins.entry(key).or_insert(0.0) += unit;
    }
    bins
}

/// Lebesgue measure of the range bins of side `bin_width` that contain a
/// critical value, with criticality tested at the finest admissible level.
pub fn critical_value_measure(jet: &GridJet, probe: &RankVarietyProbe, bin_width: f64) -> Result<f64> {
    check_width(bin_width)?;
    let pts = critical_points(jet, probe, finest_level(jet.resolution())?)?;
    let bins = binned_masses(jet, &pts, bin_width);
    Ok(bins.len() as f64 * bin_width.powi(jet.range_dimension() as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakSardRow {
    pub bin_width: f64,
    /// Mass of φ_♯(1_Z 𝓛^d) carried by the bins.
    pub total_mass: f64,
    pub max_bin_mass: f64,
    /// Grid volume fraction of the critical set Z.
    pub z_fraction: f64,
    /// Lebesgue measure of the occupied bins.
    pub occupied_measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakSardCurve {
    pub rows: Vec<WeakSardRow>,
    /// Slope of log occupied_measure against log bin_width; None when the
    /// critical set is empty or fewer than two widths are given.
    pub measure_rate: Option<f64>,
    /// A single bin keeps at least half its mass as the width shrinks and
    /// holds more than 1% of the torus: the pushforward has an atom.
    pub atom_detected: bool,
}

impl WeakSardCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_width,total_mass,max_bin_mass,z_fraction\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.bin_width, r.total_mass, r.max_bin_mass, r.z_fraction));
        }
        s
    }
}

/// Empirical pushforward of Lebesgue measure on the critical set under φ,
/// binned at each width.
pub fn weak_sard_proxy(jet: &GridJet, probe: &RankVarietyProbe, bin_widths: &[f64]) -> Result<WeakSardCurve> {
    if bin_widths.is_empty() {
        return Err(Error::Input("no bin widths given".into()));
    }
    for &w in bin_widths {
        check_width(w)?;
    }
    let pts = critical_points(jet, probe, finest_level(jet.resolution())?)?;
    let z_fraction = pts.len() as f64 / jet.points() as f64;
    let m = jet.range_dimension() as i32;
    let rows: Vec<WeakSardRow> = bin_widths
        .iter()
        .map(|&w| {
            let bins = binned_masses(jet, &pts, w);
            WeakSardRow {
                bin_width: w,
                total_mass: bins.values().sum(),
                max_bin_mass: bins.values().copied().fold(0.0, f64::max),
                z_fraction,
                occupied_measure: bins.len() as f64 * w.powi(m),
            }
        })
        .collect();
    let usable: Vec<&WeakSardRow> = rows.iter().filter(|r| r.occupied_measure > 0.0).collect();
    let measure_rate = if usable.len() >= 2 {
        let xs: Vec<f64> = usable.iter().map(|r| r.bin_width.ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|r| r.occupied_measure.ln()).collect();
        linear_fit(&xs, &ys).map(|f| f.slope)
    } else {
        None
    };
    let widest = rows.iter().max_by(|a, b| a.bin_width.total_cmp(&b.bin_width)).unwrap();
    let narrowest = rows.iter().min_by(|a, b| a.bin_width.total_cmp(&b.bin_width)).unwrap();
    let atom_detected = narrowest.max_bin_mass > 0.01 && narrowest.max_bin_mass >= 0.5 * widest.max_bin_mass;
    Ok(WeakSardCurve {
        rows,
        measure_rate,
        atom_detected,
    })
}
