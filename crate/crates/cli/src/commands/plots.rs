//! `vrelease plots`: gnuplot scripts with the data inlined, two panels
//! stacked vertically: the control channel (sterile males or Wolbachia
//! proportion) on top, infectious humans against the uncontrolled outbreak
//! below.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::output::write_text;
use crate::PlotsArgs;

/// Selected columns of a trajectory CSV, kept as the original text so the
/// script reproduces the data exactly.
#[derive(Debug)]
struct Series {
    control: Option<(&'static str, Vec<[String; 2]>)>,
    infected: Vec<[String; 2]>,
}

fn read_series(path: &Path) -> Result<Series> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(t), Some(ih)) = (col("time"), col("I_H")) else {
        bail!("{}: expected `time` and `I_H` columns", path.display());
    };
    let control = ["M_S", "p"]
        .into_iter()
        .find_map(|n| col(n).map(|i| (n, i)));
    let mut s = Series {
        control: control.map(|(n, _)| (n, Vec::new())),
        infected: Vec::new(),
    };
    for rec in r.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let time = rec[t].to_string();
        s.infected.push([time.clone(), rec[ih].to_string()]);
        if let (Some((_, i)), Some((_, rows))) = (control, s.control.as_mut()) {
            rows.push([time, rec[i].to_string()]);
        }
    }
    if s.infected.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(s)
}

fn datablock(out: &mut String, name: &str, rows: &[[String; 2]]) {
    let _ = writeln!(out, "${name} << EOD");
    for [a, b] in rows {
        let _ = writeln!(out, "{a} {b}");
    }
    let _ = writeln!(out, "EOD\n");
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

/// The script text for one trajectory. Output names are relative so the
/// script does not depend on where it was generated.
fn script(
    traj_name: &str,
    traj: &Series,
    baseline: Option<(&str, &Series)>,
    image: &str,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# trajectory: {traj_name}");
    if let Some((name, _)) = baseline {
        let _ = writeln!(s, "# uncontrolled: {name}");
    }
    let _ = writeln!(s);
    if let Some((_, rows)) = &traj.control {
        datablock(&mut s, "control", rows);
    }
    datablock(&mut s, "infected", &traj.infected);
    if let Some((_, b)) = baseline {
        datablock(&mut s, "uncontrolled", &b.infected);
    }
    let _ = writeln!(s, "set terminal pngcairo size 900,900");
    let _ = writeln!(s, "set output '{image}'");
    let _ = writeln!(s, "set multiplot layout 2,1");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set key top right");
    let _ = writeln!(s, "set xlabel 'time (days)'");
    match &traj.control {
        Some(("M_S", _)) => {
            let _ = writeln!(s, "set ylabel 'sterile males'");
            let _ = writeln!(s, "plot $control using 1:2 with lines lw 2 title 'M_S'");
        }
        Some((name, _)) => {
            let _ = writeln!(s, "set ylabel 'Wolbachia proportion'");
            let _ = writeln!(s, "set yrange [0:1]");
            let _ = writeln!(s, "plot $control using 1:2 with lines lw 2 title '{name}'");
            let _ = writeln!(s, "set autoscale y");
        }
        None => {
            let _ = writeln!(s, "set ylabel 'control'");
            let _ = writeln!(s, "plot 0 title 'no control channel'");
        }
    }
    let _ = writeln!(s, "set ylabel 'infectious humans'");
    if baseline.is_some() {
        let _ = writeln!(
            s,
            "plot $infected using 1:2 with lines lw 2 title 'I_H', \\\n     $uncontrolled using 1:2 with lines dt 2 lw 2 title 'I_H*'"
        );
    } else {
        let _ = writeln!(s, "plot $infected using 1:2 with lines lw 2 title 'I_H'");
    }
    let _ = writeln!(s, "unset multiplot");
    s
}

pub fn run(args: &PlotsArgs) -> Result<u8> {
    let explicit = match &args.baseline {
        Some(p) => Some((p.clone(), read_series(p)?)),
        None => None,
    };
    for path in &args.trajectories {
        if !path.exists() {
            bail!("{}: no such file", path.display());
        }
        let traj = read_series(path)?;
        let sibling: Option<(PathBuf, Series)> = match &explicit {
            Some(_) => None,
            None => {
                let candidate = path.with_file_name("baseline.csv");
                if candidate.exists() && candidate != *path {
                    Some((candidate.clone(), read_series(&candidate)?))
                } else {
                    None
                }
            }
        };
        let baseline = explicit
            .as_ref()
            .or(sibling.as_ref())
            .map(|(p, s)| (file_name(p), s));
        let stem = path
            .file_stem()
            .map_or_else(|| "trajectory".into(), |s| s.to_string_lossy().into_owned());
        let dir = match &args.out {
            Some(d) => crate::output::ensure_dir(d)?,
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        let target = dir.join(format!("{stem}.gp"));
        let text = script(
            &file_name(path),
            &traj,
            baseline.as_ref().map(|(n, s)| (n.as_str(), *s)),
            &format!("{stem}.png"),
        );
        write_text(&target, &text)?;
        println!("{}", target.display());
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_has_two_panels_and_inline_data() {
        let traj = Series {
            control: Some((
                "p",
                vec![["0.0".into(), "0.5".into()], ["1.0".into(), "0.6".into()]],
            )),
            infected: vec![["0.0".into(), "20.0".into()], ["1.0".into(), "21.0".into()]],
        };
        let text = script("t.csv", &traj, Some(("b.csv", &traj)), "t.png");
        assert!(text.contains("$control << EOD\n0.0 0.5\n1.0 0.6\nEOD"));
        assert!(text.contains("set multiplot layout 2,1"));
        assert!(text.contains("I_H*"));
        assert_eq!(text.matches("\nplot ").count(), 2);
    }
}
