//! Artifact formatting. Every writer renders to a `String`; files are only
//! touched once all artifacts of a command are ready.

use std::fmt::Write as _;
use std::path::Path;

use flockcert::experiments::{Polyline, ProbabilityGrid};
use flockcert::monitor::MonitorReport;
use flockcert::{FlockState, Trajectory};
use serde_json::json;

/// Round-trip float formatting: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let row: Vec<String> = fields.into_iter().collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

fn indexed(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |k| format!("{prefix}_{k}"))
}

pub fn trajectory_csv(tr: &Trajectory) -> String {
    let d = tr.final_state.dim();
    let mut out = String::new();
    push_row(
        &mut out,
        ["t".into(), "X".into(), "V".into()]
            .into_iter()
            .chain(indexed("vbar", d)),
    );
    for k in 0..tr.times.len() {
        push_row(
            &mut out,
            [tr.times[k], tr.x_series[k], tr.v_series[k]]
                .into_iter()
                .chain(tr.mean_velocity_series[k].iter().copied())
                .map(num),
        );
    }
    out
}

pub fn snapshots_csv(tr: &Trajectory) -> Option<String> {
    let snaps = tr.snapshots.as_ref()?;
    let d = tr.final_state.dim();
    let mut out = String::new();
    push_row(
        &mut out,
        ["record".into(), "t".into(), "agent".into()]
            .into_iter()
            .chain(indexed("x", d))
            .chain(indexed("v", d)),
    );
    for (k, (s, t)) in snaps.iter().zip(&tr.times).enumerate() {
        for i in 0..s.agents() {
            push_row(
                &mut out,
                [k.to_string(), num(*t), i.to_string()]
                    .into_iter()
                    .chain(s.position(i).iter().map(|&x| num(x)))
                    .chain(s.velocity(i).iter().map(|&x| num(x))),
            );
        }
    }
    Some(out)
}

pub fn summary_json(tr: &Trajectory) -> serde_json::Value {
    json!({
        "consensus": tr.consensus,
        "first_crossing_time": tr.first_crossing_time,
        "final_X": tr.final_x(),
        "final_V": tr.final_v(),
        "steps": tr.steps,
    })
}

pub fn monitor_csv(rep: &MonitorReport) -> String {
    let mut out =
        String::from("t,X,V,dV_dt_fd,dV_dt_exact,bound,residual,fd_slack,weighted_bound\n");
    for p in &rep.points {
        push_row(
            &mut out,
            [
                p.t,
                p.x,
                p.v,
                p.dv_dt_fd,
                p.dv_dt_exact,
                p.bound,
                p.residual,
                p.fd_slack,
            ]
            .into_iter()
            .map(num)
            .chain(std::iter::once(
                p.weighted_bound.map(num).unwrap_or_default(),
            )),
        );
    }
    out
}

/// Agent rows `agent,x_1..x_d,v_1..v_d`.
pub fn state_csv(s: &FlockState) -> String {
    let d = s.dim();
    let mut out = String::new();
    push_row(
        &mut out,
        std::iter::once("agent".to_string())
            .chain(indexed("x", d))
            .chain(indexed("v", d)),
    );
    for i in 0..s.agents() {
        push_row(
            &mut out,
            std::iter::once(i.to_string())
                .chain(s.position(i).iter().map(|&x| num(x)))
                .chain(s.velocity(i).iter().map(|&x| num(x))),
        );
    }
    out
}

/// Inverse of [`state_csv`].
pub fn parse_state_csv(text: &str) -> Result<FlockState, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty state file")?;
    let cols = header.split(',').count();
    if cols < 3 || (cols - 1) % 2 != 0 {
        return Err(format!(
            "header must be agent,x_1..x_d,v_1..v_d; got {cols} columns"
        ));
    }
    let d = (cols - 1) / 2;
    let (mut xs, mut vs) = (Vec::new(), Vec::new());
    let mut n = 0;
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols {
            return Err(format!(
                "line {}: expected {cols} fields, got {}",
                row + 2,
                fields.len()
            ));
        }
        let parsed: Result<Vec<f64>, _> = fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        let parsed = parsed.map_err(|e| format!("line {}: {e}", row + 2))?;
        xs.extend_from_slice(&parsed[..d]);
        vs.extend_from_slice(&parsed[d..]);
        n += 1;
    }
    FlockState::new(n, d, xs, vs).map_err(|e| e.to_string())
}

pub fn grid_csv(g: &ProbabilityGrid) -> String {
    let mut out = String::from("X0,V0,probability,certified\n");
    for (i, &x) in g.x_grid.iter().enumerate() {
        for (j, &v) in g.v_grid.iter().enumerate() {
            push_row(
                &mut out,
                [
                    num(x),
                    num(v),
                    num(g.probabilities[i][j]),
                    u8::from(g.certified[i][j]).to_string(),
                ],
            );
        }
    }
    out
}

pub fn contour_csv(lines: &[Polyline]) -> String {
    let mut out = String::from("contour,point,X0,V0\n");
    for (c, l) in lines.iter().enumerate() {
        for (k, &(x, v)) in l.points.iter().enumerate() {
            push_row(&mut out, [c.to_string(), k.to_string(), num(x), num(v)]);
        }
    }
    out
}

/// Gnuplot script drawing the probability field, the certified cells and,
/// when present, the level curves.
pub fn gnuplot_script(grid_file: &str, contour: Option<(&str, usize, f64)>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script: consensus probability over (X0, V0)");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead outside");
    let _ = writeln!(s, "set xlabel 'X0'");
    let _ = writeln!(s, "set ylabel 'V0'");
    let _ = writeln!(s, "set cbrange [0:1]");
    let _ = writeln!(s, "set cblabel 'P(consensus)'");
    let _ = writeln!(s, "set palette defined (0 'white', 1 'navy')");
    let mut plot = format!(
        "plot '{grid_file}' using 1:2:3 with points pt 5 ps 2 palette title 'probability', \\\n     \
         '' using 1:2:($4 > 0 ? 1 : NaN) with points pt 6 ps 2 lc rgb 'red' title 'certified'"
    );
    if let Some((file, count, level)) = contour {
        if count > 0 {
            let _ = write!(
                plot,
                ", \\\n     for [k=0:{}] '{file}' using ($1 == k ? $3 : NaN):4 with lines lw 2 lc rgb 'orange' title (k == 0 ? '{}% contour' : '')",
                count - 1,
                level * 100.0
            );
        }
    }
    s.push_str(&plot);
    s.push('\n');
    s
}

/// Creates `dir` and writes every artifact.
pub fn write_all(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in files {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bit_exact() {
        for x in [
            0.1,
            1.0 / 3.0,
            6.02214076e23,
            -2.2250738585072014e-308,
            5e-324,
        ] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn state_csv_round_trip() {
        let s = flockcert::experiments::generate_ic(7, 3, 5).unwrap();
        assert_eq!(parse_state_csv(&state_csv(&s)).unwrap(), s);
        assert!(parse_state_csv("agent,x_1,v_1\n0,1.0\n").is_err());
        assert!(parse_state_csv("agent,x_1,v_1\n0,1.0,abc\n").is_err());
    }

    #[test]
    fn grid_rows_x_major() {
        let g = ProbabilityGrid {
            x_grid: vec![1.0, 2.0],
            v_grid: vec![0.5],
            probabilities: vec![vec![1.0], vec![0.25]],
            certified: vec![vec![true], vec![false]],
        };
        let csv = grid_csv(&g);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "X0,V0,probability,certified");
        assert!(rows[1].ends_with(",1"));
        assert!(rows[2].starts_with("2.0000000000000000e0,"));
        assert!(rows[2].ends_with(",0"));
    }
}
