//! Browser bindings. Each operation takes a run config as JSON (the same
//! format the command-line tool reads) and returns a JSON document.

use homogvi::cell::homogenized_tensor;
use homogvi::config::Config;
use homogvi::fem::{l2_error, Target};
use homogvi::mesh::Mesh;
use homogvi::pipeline::{build_homogenized_field, multiscale_check, solve_epsilon_vi, solve_homogenized_vi};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse(config: &str) -> Result<Config, String> {
    Config::from_json(config).map_err(err)
}

fn matrix(m: &homogvi::tensor::SmallMat) -> Value {
    let d = m.dim();
    json!((0..d).map(|i| (0..d).map(|j| m.get(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>())
}

/// `A*` at the cell anchor, with the meso samples `Ã(y)` at the meso cell centroids.
pub fn homogenize_json(config: &str) -> Result<String, String> {
    let config = parse(config)?;
    let coeff = config.coefficient().map_err(err)?;
    let anchor = config.cell.anchor.clone().unwrap_or_else(|| vec![0.5; config.dimension]);
    let report = homogenized_tensor(&coeff, &anchor, &config.cell.resolutions(), &config.cell.options()).map_err(err)?;
    let mesh = report.meso_cell.mesh();
    let centroids: Vec<Vec<f64>> = (0..mesh.n_elements()).map(|e| mesh.centroid(e)[..mesh.dim()].to_vec()).collect();
    Ok(json!({
        "a_star": matrix(&report.tensor.matrix),
        "strategy": report.strategy,
        "micro_solves": report.micro_solves,
        "meso_points": centroids,
        "a_tilde": report.meso_samples.iter().map(matrix).collect::<Vec<_>>(),
        "energy_gap": report.micro_energy_gap.max(report.meso_energy_gap),
    })
    .to_string())
}

/// `u_ε` on the fine mesh next to `u₀` on the macro mesh (1D configs).
pub fn compare_json(config: &str) -> Result<String, String> {
    let config = parse(config)?;
    if config.dimension != 1 {
        return Err("the comparison view supports dimension 1".into());
    }
    let coeff = config.coefficient().map_err(err)?;
    let obstacle = config.obstacle().map_err(err)?;
    let f = config.load().map_err(err)?;
    let eps = config.epsilon.as_ref().ok_or("missing epsilon block")?;
    let (lo, hi) = config.domain();
    let method = config.solver.method();
    let macro_mesh = Mesh::build(&lo, &hi, &[config.macro_mesh.subdivisions]).map_err(err)?;
    let fine = Mesh::build(&lo, &hi, &[eps.subdivisions]).map_err(err)?;
    let (field, _) =
        build_homogenized_field(&coeff, &macro_mesh, &config.cell.resolutions(), &config.cell.options()).map_err(err)?;
    let u0 = solve_homogenized_vi(&field, &f, &obstacle, &macro_mesh, &method).map_err(err)?;
    let ue = solve_epsilon_vi(&coeff, eps.eps, &f, &obstacle, &fine, &method, eps.formulation, eps.guard).map_err(err)?;
    let u0_fine: Vec<f64> = (0..fine.n_vertices()).map(|v| macro_mesh.interpolate(&u0.u, fine.vertex(v))).collect();
    let xs = |m: &Mesh| (0..m.n_vertices()).map(|v| m.vertex(v)[0]).collect::<Vec<_>>();
    let psi = obstacle.nodal(&fine, Some(eps.eps));
    Ok(json!({
        "x": xs(&fine),
        "u_eps": ue.u,
        "psi_eps": psi.iter().map(|p| if p.is_finite() { Some(*p) } else { None }).collect::<Vec<_>>(),
        "active_eps": ue.active,
        "x0": xs(&macro_mesh),
        "u0": u0.u,
        "a_star": matrix(&field.tensors[0].matrix),
        "l2_error": l2_error(&fine, &ue.u, Target::Nodal(&u0_fine)),
        "iterations": ue.iterations,
        "warnings": ue.warnings,
    })
    .to_string())
}

/// Oscillatory integrals `I_ε` against their mean-value limit.
pub fn mscheck_json(config: &str) -> Result<String, String> {
    let config = parse(config)?;
    let spec = config.mscheck_spec().map_err(err)?;
    let (lo, hi) = config.domain();
    let (ay, az) = config.algebras();
    let rows = multiscale_check(&lo, &hi, &spec, &ay, &az).map_err(err)?;
    serde_json::to_string(&rows).map_err(err)
}

#[wasm_bindgen]
pub fn homogenize(config: &str) -> Result<String, JsValue> {
    homogenize_json(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn compare(config: &str) -> Result<String, JsValue> {
    compare_json(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn mscheck(config: &str) -> Result<String, JsValue> {
    mscheck_json(config).map_err(|e| JsValue::from_str(&e))
}
