//! TimeSeries CSV: header
//! `t,mass,boundary_mass,lp2,lp{p}...,dk{k}...,diss_p{p}...,env_p{p}...`,
//! one row per sample, 17 significant digits throughout. Dispersal runs
//! append their relative-entropy and comparison columns.

use crate::json::format_float;
use nonlocal_core::evolution::TimeSeries;
use std::io::{self, Write};

/// Compact numeric label: `2` not `2.0`, `2.5` stays `2.5`.
pub fn num_label(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

pub fn render_series(out: &mut impl Write, series: &TimeSeries) -> io::Result<()> {
    let mut header = String::from("t,mass,boundary_mass");
    for p in &series.p_list {
        header.push_str(&format!(",lp{}", num_label(*p)));
    }
    for k in &series.k_list {
        header.push_str(&format!(",dk{}", num_label(*k)));
    }
    for p in &series.p_list {
        header.push_str(&format!(",diss_p{}", num_label(*p)));
    }
    for (pi, p) in series.p_list.iter().enumerate() {
        if series.envelope[pi].is_some() {
            header.push_str(&format!(",env_p{}", num_label(*p)));
        }
    }
    for (pi, p) in series.p_list.iter().enumerate() {
        if series.entropy[pi].is_some() {
            header.push_str(&format!(",X_p{}", num_label(*p)));
        }
    }
    for (name, _) in &series.aux {
        header.push_str(&format!(",{name}"));
    }
    writeln!(out, "{header}")?;
    for i in 0..series.len() {
        let mut row = format!(
            "{},{},{}",
            format_float(series.times[i]),
            format_float(series.mass[i]),
            format_float(series.boundary_mass[i])
        );
        for col in &series.lp_pow {
            row.push(',');
            row.push_str(&format_float(col[i]));
        }
        for col in &series.dk_norms {
            row.push(',');
            row.push_str(&format_float(col[i]));
        }
        for col in &series.dissipation {
            row.push(',');
            row.push_str(&format_float(col[i]));
        }
        for env in series.envelope.iter().flatten() {
            row.push(',');
            row.push_str(&format_float(env[i]));
        }
        for x in series.entropy.iter().flatten() {
            row.push(',');
            row.push_str(&format_float(x[i]));
        }
        for (_, col) in &series.aux {
            row.push(',');
            row.push_str(&format_float(col[i]));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn write_series(path: &std::path::Path, series: &TimeSeries) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = io::BufWriter::new(file);
    render_series(&mut out, series)
}
