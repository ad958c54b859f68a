//! WebAssembly bindings for the demo page in `www/`. Every export returns a
//! finished SVG document plus a few numbers; the page only wires up inputs.

use std::sync::{Arc, OnceLock};

use primerace::barrier::{k5_phase_inequality, k5_phase_min};
use primerace::explicit::{psi_chi_sieved, psi_chi_truncated};
use primerace::numeric::log_space;
use primerace::race::{run_race, RaceHistory};
use primerace::report::{svg_line_plot, Curve, PlotOptions};
use primerace::residues::{build_modulus, character};
use primerace::sieve::SieveConfig;
use primerace::zeros::ZeroSet;
use wasm_bindgen::prelude::*;

/// Largest sieve limit the page may request.
pub const MAX_LIMIT: u64 = 20_000_000;

const ZEROS_MOD4: &str = include_str!("../../../data/zeros_mod4.txt");

fn zeros_mod4() -> Result<&'static ZeroSet, JsError> {
    static CELL: OnceLock<ZeroSet> = OnceLock::new();
    if let Some(z) = CELL.get() {
        return Ok(z);
    }
    let z = ZeroSet::parse(ZEROS_MOD4).map_err(err)?;
    Ok(CELL.get_or_init(|| z))
}

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct RaceView {
    svg: String,
    first_negative: Option<f64>,
    sign_changes: u32,
    final_delta: i32,
}

#[wasm_bindgen]
impl RaceView {
    #[wasm_bindgen(getter)]
    pub fn svg(&self) -> String {
        self.svg.clone()
    }

    /// `undefined` when the difference never went negative.
    #[wasm_bindgen(getter, js_name = firstNegative)]
    pub fn first_negative(&self) -> Option<f64> {
        self.first_negative
    }

    #[wasm_bindgen(getter, js_name = signChanges)]
    pub fn sign_changes(&self) -> u32 {
        self.sign_changes
    }

    #[wasm_bindgen(getter, js_name = finalDelta)]
    pub fn final_delta(&self) -> i32 {
        self.final_delta
    }
}

/// `π(x;k,l1) − π(x;k,l2)` on `points` evenly spaced x up to `limit`.
#[wasm_bindgen(js_name = raceCurve)]
pub fn race_curve(k: u32, l1: u32, l2: u32, limit: f64, points: u32) -> Result<RaceView, JsError> {
    let limit = limit as u64;
    if !(2..=MAX_LIMIT).contains(&limit) {
        return Err(JsError::new(&format!("limit must lie in [2, {MAX_LIMIT}]")));
    }
    let (k, l1, l2) = (k as u64, l1 as u64, l2 as u64);
    let cfg = SieveConfig::new(limit);
    let state = run_race(k, &[l1, l2], limit, &cfg).map_err(err)?;
    let history = RaceHistory::collect(k, &[l1, l2], limit, &cfg).map_err(err)?;
    let n = points.clamp(2, 4000) as u64;
    let mut pts = Vec::with_capacity(n as usize);
    for i in 0..n {
        let x = (2 + i * (limit - 2) / (n - 1)) as f64;
        let d = history.pi(x, l1).map_err(err)? as f64 - history.pi(x, l2).map_err(err)? as f64;
        pts.push((x, d));
    }
    let opts = PlotOptions {
        title: format!("pi(x;{k},{l1}) - pi(x;{k},{l2})"),
        y_label: "difference".into(),
        ..PlotOptions::default()
    };
    Ok(RaceView {
        svg: svg_line_plot(&[Curve::new(format!("{l1} vs {l2}"), None, pts)], &opts),
        first_negative: state.first_negative(l1, l2).map_err(err)?.map(|x| x as f64),
        sign_changes: state.sign_changes(l1, l2).map_err(err)? as u32,
        final_delta: state.delta(l1, l2).map_err(err)? as i32,
    })
}

/// Sieved `ψ(x, χ₋₄)` against the zero sum truncated at each height in `heights`.
#[wasm_bindgen(js_name = explicitOverlay)]
pub fn explicit_overlay(x_min: f64, x_max: f64, heights: Vec<f64>, points: u32) -> Result<String, JsError> {
    if !(x_min >= 10.0 && x_max > x_min && x_max <= MAX_LIMIT as f64) {
        return Err(JsError::new(&format!("need 10 <= x_min < x_max <= {MAX_LIMIT}")));
    }
    let zs = zeros_mod4()?;
    let m = Arc::new(build_modulus(4).map_err(err)?);
    let chi = character(&m, &[1]).map_err(err)?;
    let limit = x_max.ceil() as u64;
    let history = RaceHistory::collect(4, m.units(), limit, &SieveConfig::new(limit)).map_err(err)?;
    let xs = log_space(x_min, x_max, points.clamp(2, 2000) as usize);
    let mut curves = Vec::new();
    let sieve = xs
        .iter()
        .map(|&x| Ok((x, psi_chi_sieved(&chi, &history, x).map_err(err)?.re)))
        .collect::<Result<Vec<_>, JsError>>()?;
    curves.push(Curve::new("sieve", None, sieve));
    for &t in &heights {
        let pts = xs
            .iter()
            .map(|&x| Ok((x, psi_chi_truncated(x, &chi, zs, t).map_err(err)?.re)))
            .collect::<Result<Vec<_>, JsError>>()?;
        curves.push(Curve::new(format!("zeros up to T={t}"), Some(t), pts));
    }
    let opts = PlotOptions {
        title: "psi(x, chi_-4): sieve and truncated explicit formula".into(),
        log_x: true,
        ..PlotOptions::default()
    };
    Ok(svg_line_plot(&curves, &opts))
}

/// `m(θ) = min(−sin θ, (sin θ − cos θ)/2, cos θ)` over one period, with the
/// line at `−√0.1`; the title carries the grid certificate for `step`.
#[wasm_bindgen(js_name = phaseCurve)]
pub fn phase_curve(step: f64, points: u32) -> Result<String, JsError> {
    let cert = k5_phase_inequality(step).map_err(err)?;
    let n = points.clamp(2, 20_000);
    let tau = std::f64::consts::TAU;
    let curve: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let th = tau * i as f64 / (n - 1) as f64;
            (th, k5_phase_min(th))
        })
        .collect();
    let bound = vec![(0.0, cert.bound), (tau, cert.bound)];
    let opts = PlotOptions {
        title: format!(
            "max m = {:.6} at theta = {:.4}; bound {:.6}; certified: {}",
            cert.grid_max, cert.worst_theta, cert.bound, cert.certified
        ),
        x_label: "theta".into(),
        y_label: "m(theta)".into(),
        ..PlotOptions::default()
    };
    Ok(svg_line_plot(&[Curve::new("m(theta)", None, curve), Curve::new("-sqrt(0.1)", None, bound)], &opts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn race_view_mod4() {
        let v = race_curve(4, 3, 1, 30_000.0, 300).unwrap();
        assert_eq!(v.first_negative(), Some(26_861.0));
        assert!(v.svg().starts_with("<svg"));
    }

    #[test]
    fn phase_curve_is_certified() {
        assert!(phase_curve(1e-4, 500).unwrap().contains("certified: true"));
    }

    #[test]
    fn overlay_has_one_curve_per_height() {
        let svg = explicit_overlay(1e3, 1e5, vec![50.0, 500.0], 50).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}
