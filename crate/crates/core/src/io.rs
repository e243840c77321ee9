//! Deterministic text output: mesh dumps, solution tables and the
//! convergence report.
//!
//! Every float is printed with 12 significant digits in scientific notation
//! through the same formatter, and all iteration orders are fixed, so a
//! repeated run of the same configuration produces byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::analysis::ConvergenceReport;
use crate::geometry::Mesh;
use crate::limit_problem::{LimitSolution, Oracle1d};
use crate::vi_solver::{DiscreteVI, KktResidual, SolveResult};

/// 12 significant digits, scientific, locale-independent. Negative zero is
/// normalized so that algebraically identical runs cannot differ in sign bits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000e0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    format!("{:.11e}", x)
}

/// Write `nodes.csv`, `elements.csv` and `edges.csv` into `dir`.
pub fn write_mesh(dir: &Path, mesh: &Mesh) -> std::io::Result<()> {
    let mut nodes = String::from("id,x1,x2\n");
    for (id, p) in mesh.nodes.iter().enumerate() {
        nodes.push_str(&format!("{},{},{}\n", id, fmt_sig(p[0]), fmt_sig(p[1])));
    }
    fs::write(dir.join("nodes.csv"), nodes)?;

    let mut elements = String::from("id,n0,n1,n2,n3,region\n");
    for (id, el) in mesh.elements.iter().enumerate() {
        elements.push_str(&format!(
            "{},{},{},{},{},{}\n",
            id,
            el.nodes[0],
            el.nodes[1],
            el.nodes[2],
            el.nodes[3],
            el.region.as_str()
        ));
    }
    fs::write(dir.join("elements.csv"), elements)?;

    let mut edges = String::from("elem,local_edge,tag\n");
    for be in &mesh.boundary_edges {
        edges.push_str(&format!("{},{},{}\n", be.elem, be.local_edge, be.tag.as_str()));
    }
    fs::write(dir.join("edges.csv"), edges)?;
    Ok(())
}

/// Write `solution.csv`: per node id, coordinates, value, multiplier (empty
/// field when the node is unconstrained) and activity flag.
pub fn write_solution(path: &Path, mesh: &Mesh, vi: &DiscreteVI, result: &SolveResult)
    -> std::io::Result<()> {
    let u_full = vi.system.expand(&result.u);
    let mut mu_full: Vec<Option<f64>> = vec![None; mesh.n_nodes()];
    let mut active_full = vec![false; mesh.n_nodes()];
    for (k, &(red, _)) in vi.constraints.iter().enumerate() {
        let node = vi.system.free_nodes[red];
        mu_full[node] = Some(result.mu[k]);
    }
    for &red in &result.active_set {
        active_full[vi.system.free_nodes[red]] = true;
    }
    let mut out = String::from("node,x1,x2,u,mu,active\n");
    for (id, p) in mesh.nodes.iter().enumerate() {
        let mu_str = mu_full[id].map(fmt_sig).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            id,
            fmt_sig(p[0]),
            fmt_sig(p[1]),
            fmt_sig(u_full[id]),
            mu_str,
            u8::from(active_full[id])
        ));
    }
    fs::write(path, out)
}

/// Write the KKT report of a solve.
pub fn write_kkt_report(
    path: &Path,
    kkt: &KktResidual,
    result: &SolveResult,
) -> std::io::Result<()> {
    let mut out = String::from(
        "feasibility,sign,complementarity,stationarity,iterations,active_count,converged\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        fmt_sig(kkt.feasibility),
        fmt_sig(kkt.sign),
        fmt_sig(kkt.complementarity),
        fmt_sig(kkt.stationarity),
        result.iterations,
        result.active_set.len(),
        u8::from(result.converged)
    ));
    fs::write(path, out)
}

/// Write `limit_solution.csv`: node, region, value, activity flag.
pub fn write_limit_solution(
    path: &Path,
    mesh: &Mesh,
    vi: &DiscreteVI,
    solution: &LimitSolution,
) -> std::io::Result<()> {
    let mut active_full = vec![false; mesh.n_nodes()];
    for &red in &solution.result.active_set {
        active_full[vi.system.free_nodes[red]] = true;
    }
    let mut out = String::from("node,region,u,active\n");
    for (id, p) in mesh.nodes.iter().enumerate() {
        let region = if p[1] < 0.0 {
            "d0"
        } else if p[1] == 0.0 {
            "i0"
        } else {
            "body"
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            id,
            region,
            fmt_sig(solution.u[id]),
            u8::from(active_full[id])
        ));
    }
    fs::write(path, out)
}

/// Write `oracle.csv`: the 1D profile.
pub fn write_oracle(path: &Path, oracle: &Oracle1d) -> std::io::Result<()> {
    let mut out = String::from("x2,u\n");
    for (y, u) in oracle.x2.iter().zip(&oracle.u) {
        out.push_str(&format!("{},{}\n", fmt_sig(*y), fmt_sig(*u)));
    }
    fs::write(path, out)
}

/// Write `report.csv` with the fixed column order: N, eps, both energies,
/// the energy gap, the body and trace gaps, then one weak-gap column and one
/// derivative-gap column per test function.
pub fn write_report(path: &Path, report: &ConvergenceReport) -> std::io::Result<()> {
    let mut file = fs::File::create(path)?;
    let mut header = String::from("N,eps,E_eps,E_0,energy_gap,body_l2_gap,trace_gap");
    for psi in &report.test_functions {
        header.push_str(&format!(",weak_gap({psi})"));
    }
    for psi in &report.test_functions {
        header.push_str(&format!(",deriv_gap({psi})"));
    }
    header.push('\n');
    file.write_all(header.as_bytes())?;
    for row in &report.rows {
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            row.n_rods,
            fmt_sig(row.eps),
            fmt_sig(row.e_eps),
            fmt_sig(row.e_0),
            fmt_sig(row.energy_gap),
            fmt_sig(row.body_l2_gap),
            fmt_sig(row.trace_gap)
        );
        for g in &row.weak_gaps {
            line.push_str(&format!(",{}", fmt_sig(*g)));
        }
        for g in &row.deriv_gaps {
            line.push_str(&format!(",{}", fmt_sig(*g)));
        }
        line.push('\n');
        file.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_is_fixed_width_scientific() {
        assert_eq!(fmt_sig(1.5), "1.50000000000e0");
        assert_eq!(fmt_sig(0.0), "0.00000000000e0");
        assert_eq!(fmt_sig(-0.0), "0.00000000000e0");
        assert_eq!(fmt_sig(-2.5e-7), "-2.50000000000e-7");
        assert_eq!(fmt_sig(f64::NAN), "nan");
        // 12 significant digits
        assert_eq!(fmt_sig(1.0 / 3.0), "3.33333333333e-1");
    }
}
