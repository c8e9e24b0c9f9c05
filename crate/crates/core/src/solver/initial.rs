use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::spectral::{self, Lattice, C64, TWO_PI};

/// One coefficient of a custom spectral table; the conjugate mode is
/// filled in automatically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralEntry {
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Bounded initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialKind {
    /// sin(2πk·x)
    SingleMode { k: Vec<i64> },
    /// ±1 on a checkerboard with `cells` cells per axis.
    Checkerboard { cells: usize },
    /// 1 on {x₁ < ½}, 0 elsewhere.
    IndicatorHalftorus,
    /// θ = Σ c_k e^{2πik·x} with c_{−k} = conj c_k.
    Spectral { entries: Vec<SpectralEntry> },
}

/// Unknown keys are rejected by the flattened `kind` variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub dimension: usize,
    #[serde(flatten)]
    pub kind: InitialKind,
    /// Keep only modes with |k|∞ ≤ cutoff. Used to hold the data fixed
    /// across resolutions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl InitialData {
    pub fn new(dimension: usize, kind: InitialKind) -> Self {
        InitialData {
            dimension,
            kind,
            cutoff: None,
            scale: 1.0,
        }
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Whether the data is a finite trigonometric polynomial.
    pub fn is_band_limited(&self) -> bool {
        self.cutoff.is_some() || matches!(self.kind, InitialKind::SingleMode { .. } | InitialKind::Spectral { .. })
    }
}

/// Scalar θ at a given time. `truncation_loss` accumulates the ∫θ²
/// removed by spectral truncations of the data.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarState {
    pub theta: GridField,
    pub time: f64,
    pub truncation_loss: f64,
}

impl ScalarState {
    pub fn new(theta: GridField) -> Result<Self> {
        if theta.components() != 1 {
            return Err(Error::Shape("scalar state needs a one-component field".into()));
        }
        Ok(ScalarState {
            theta,
            time: 0.0,
            truncation_loss: 0.0,
        })
    }
}

/// Builds the initial state. Without a cutoff, discontinuous data are
/// sampled pointwise, so grid values are exact and the coefficients are
/// the discrete series. With a cutoff they are the exact Fourier series
/// truncated at |k|∞ ≤ cutoff, identical on every grid.
pub fn initialize(data: &InitialData, resolution: usize) -> Result<ScalarState> {
    let dim = data.dimension;
    if !(2..=3).contains(&dim) {
        return Err(Error::Config(format!("initial data dimension must be 2 or 3, got {dim}")));
    }
    if !(data.scale.is_finite() && data.scale != 0.0) {
        return Err(Error::Config("initial data scale must be finite and nonzero".into()));
    }
    if let Some(cutoff) = data.cutoff {
        if let Some(state) = truncated_series(data, resolution, cutoff)? {
            return Ok(state);
        }
    }
    let field = match &data.kind {
        InitialKind::SingleMode { k } => {
            check_mode(k, dim, resolution)?;
            let k = k.clone();
            GridField::from_fn(dim, resolution, 1, move |x, o| {
                let ph: f64 = x.iter().zip(&k).map(|(xa, &ka)| xa * ka as f64).sum();
                o[0] = (TWO_PI * ph).sin();
            })?
        }
        InitialKind::Checkerboard { cells } => {
            let cells = *cells;
            if cells < 2 || cells % 2 != 0 || resolution % cells != 0 {
                return Err(Error::Config(format!(
                    "checkerboard cells must be even and divide N = {resolution}, got {cells}"
                )));
            }
            let width = resolution / cells;
            let lat = Lattice::new(dim, resolution);
            let vals = (0..lat.len())
                .map(|f| {
                    let c = lat.coords(f);
                    let parity: usize = c.iter().take(dim).map(|&ci| ci / width).sum();
                    if parity % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            GridField::from_real(dim, resolution, 1, vals)?
        }
        InitialKind::IndicatorHalftorus => {
            let lat = Lattice::new(dim, resolution);
            let vals = (0..lat.len())
                .map(|f| if lat.coords(f)[0] < resolution / 2 { 1.0 } else { 0.0 })
                .collect();
            GridField::from_real(dim, resolution, 1, vals)?
        }
        InitialKind::Spectral { entries } => {
            let lat = Lattice::new(dim, resolution);
            let mut spec = vec![C64::new(0.0, 0.0); lat.len()];
            for e in entries {
                check_mode(&e.k, dim, resolution)?;
                let c = C64::new(e.re, e.im);
                let neg: Vec<i64> = e.k.iter().map(|x| -x).collect();
                if e.k.iter().all(|&x| x == 0) {
                    spec[0] = C64::new(e.re, 0.0);
                } else {
                    spec[lat.index_of(&e.k)] += c;
                    spec[lat.index_of(&neg)] += c.conj();
                }
            }
            GridField::from_spectral(dim, resolution, 1, spec)?
        }
    };
    let field = if data.scale != 1.0 { field.scaled(data.scale) } else { field };
    let mut state = ScalarState::new(field)?;
    if let Some(cutoff) = data.cutoff {
        state = truncate_state(&state, cutoff)?;
    }
    Ok(state)
}

/// Fourier coefficient of the 1-periodic ±1 square wave with `cells`
/// half-periods, equal to +1 on [0, 1/cells).
fn square_wave_coefficient(k: i64, cells: usize) -> C64 {
    let half = (cells / 2) as i64;
    if k % half != 0 {
        return C64::new(0.0, 0.0);
    }
    let m = k / half;
    if m % 2 == 0 {
        C64::new(0.0, 0.0)
    } else {
        C64::new(0.0, -2.0 / (std::f64::consts::PI * m as f64))
    }
}

/// Coefficient of the indicator of {x₁ < ½} along x₁.
fn half_indicator_coefficient(k: i64) -> C64 {
    if k == 0 {
        C64::new(0.5, 0.0)
    } else if k % 2 == 0 {
        C64::new(0.0, 0.0)
    } else {
        C64::new(0.0, -1.0 / (std::f64::consts::PI * k as f64))
    }
}

/// Exact Fourier series of discontinuous data truncated at |k|∞ ≤ cutoff.
/// Independent of the grid, so runs at different N see identical data.
fn truncated_series(data: &InitialData, resolution: usize, cutoff: usize) -> Result<Option<ScalarState>> {
    let dim = data.dimension;
    let (coeff, total): (Box<dyn Fn(&[i64; 3]) -> C64>, f64) = match &data.kind {
        InitialKind::Checkerboard { cells } => {
            let cells = *cells;
            if cells < 2 || cells % 2 != 0 {
                return Err(Error::Config(format!("checkerboard cells must be even, got {cells}")));
            }
            (
                Box::new(move |k: &[i64; 3]| {
                    (0..dim).fold(C64::new(1.0, 0.0), |acc, a| acc * square_wave_coefficient(k[a], cells))
                }),
                1.0,
            )
        }
        InitialKind::IndicatorHalftorus => (
            Box::new(move |k: &[i64; 3]| {
                if (1..dim).all(|a| k[a] == 0) {
                    half_indicator_coefficient(k[0])
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
            0.5,
        ),
        _ => return Ok(None),
    };
    if 2 * cutoff >= resolution {
        return Err(Error::Config(format!(
            "data cutoff {cutoff} is not representable at N = {resolution}"
        )));
    }
    let lat = Lattice::new(dim, resolution);
    let spec: Vec<C64> = (0..lat.len())
        .map(|f| {
            if lat.in_band(f, cutoff) {
                coeff(&lat.wavevector(f)) * data.scale
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let kept = spectral::energy(&spec);
    let theta = GridField::from_spectral(dim, resolution, 1, spec)?;
    Ok(Some(ScalarState {
        theta,
        time: 0.0,
        truncation_loss: total * data.scale * data.scale - kept,
    }))
}

fn check_mode(k: &[i64], dim: usize, n: usize) -> Result<()> {
    if k.len() != dim {
        return Err(Error::Config(format!("mode {k:?} must have {dim} entries")));
    }
    if k.iter().any(|x| 2 * x.unsigned_abs() as usize >= n) {
        return Err(Error::Config(format!("mode {k:?} is not representable at N = {n}")));
    }
    Ok(())
}

/// Drops modes with |k|∞ > cutoff, recording the removed ∫θ².
pub fn truncate_state(state: &ScalarState, cutoff: usize) -> Result<ScalarState> {
    let theta = &state.theta;
    let lat = theta.lattice();
    let mut spec = theta.spectral().to_vec();
    let before = spectral::energy(&spec);
    spectral::truncate(lat, &mut spec, cutoff);
    let after = spectral::energy(&spec);
    Ok(ScalarState {
        theta: GridField::from_spectral(lat.dim, lat.n, 1, spec)?,
        time: state.time,
        truncation_loss: state.truncation_loss + (before - after),
    })
}
