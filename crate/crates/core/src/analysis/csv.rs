//! CSV emission, one file per figure analog. All files use a header row,
//! `.` decimals and LF line endings; missing values are empty fields.

use std::io::Write as _;
use std::path::Path;

use super::{ActionCurves, BandReport, CorrelationMatrix, HeatmapGrid, HorizonPoint, Trajectory};
use crate::error::Result;

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(content.as_bytes())?;
    Ok(())
}

/// `alpha,lw,action`
pub fn write_action_curves_csv(path: &Path, curves: &ActionCurves) -> Result<()> {
    let mut out = String::from("alpha,lw,action\n");
    for &(alpha, lw, action) in &curves.points {
        out.push_str(&format!("{alpha},{lw},{action}\n"));
    }
    write_file(path, &out)
}

/// `alpha,target` — the frictionless reference line.
pub fn write_myopic_target_csv(path: &Path, line: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("alpha,target\n");
    for &(alpha, target) in line {
        out.push_str(&format!("{alpha},{target}\n"));
    }
    write_file(path, &out)
}

/// `lw,upper,lower` — missing band edges stay empty.
pub fn write_bands_csv(path: &Path, report: &BandReport) -> Result<()> {
    let mut out = String::from("lw,upper,lower\n");
    for row in &report.rows {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", row.lw, fmt(row.upper), fmt(row.lower)));
    }
    write_file(path, &out)
}

/// `t,alpha_s,alpha_f,alpha_total,weight,trade,reward`; mono-scale
/// trajectories write a zero fast component.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::from("t,alpha_s,alpha_f,alpha_total,weight,trade,reward\n");
    for s in &traj.steps {
        let fast = s.alpha.get(1).copied().unwrap_or(0.0);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.t, s.alpha[0], fast, s.alpha_total, s.weight, s.trade, s.reward
        ));
    }
    write_file(path, &out)
}

/// `slow,short_term,class,action`
pub fn write_heatmap_csv(path: &Path, map: &HeatmapGrid) -> Result<()> {
    let mut out = String::from("slow,short_term,class,action\n");
    let n_slow = map.slow_axis.len();
    for (r, &short) in map.short_axis.iter().enumerate() {
        for (c, &slow) in map.slow_axis.iter().enumerate() {
            let idx = r * n_slow + c;
            out.push_str(&format!(
                "{},{},{},{}\n",
                slow,
                short,
                map.class[idx].label(),
                map.action[idx]
            ));
        }
    }
    write_file(path, &out)
}

/// `row,col,value` — undefined correlations stay empty.
pub fn write_correlations_csv(path: &Path, m: &CorrelationMatrix) -> Result<()> {
    let mut out = String::from("row,col,value\n");
    for (i, row_label) in m.labels.iter().enumerate() {
        for (j, col_label) in m.labels.iter().enumerate() {
            let value = m.values[i][j].map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{row_label},{col_label},{value}\n"));
        }
    }
    write_file(path, &out)
}

/// `T,reward,stderr`
pub fn write_horizon_csv(path: &Path, points: &[HorizonPoint]) -> Result<()> {
    let mut out = String::from("T,reward,stderr\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.horizon, p.reward, p.stderr));
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{BandRow, TradeClass};
    use tempfile::tempdir;

    #[test]
    fn bands_csv_leaves_missing_edges_empty() {
        let report = BandReport {
            rows: vec![
                BandRow { lw: 0.0, upper: Some(1.5), lower: Some(-1.5) },
                BandRow { lw: 5.0, upper: None, lower: Some(-0.01) },
            ],
            eps: 1e-2,
        };
        let dir = tempdir().unwrap();
        let path = dir.path().join("bands.csv");
        write_bands_csv(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "lw,upper,lower\n0,1.5,-1.5\n5,,-0.01\n");
    }

    #[test]
    fn heatmap_csv_uses_class_labels() {
        let map = HeatmapGrid {
            slow_axis: vec![-1.0, 1.0],
            short_axis: vec![0.0],
            class: vec![TradeClass::Sell, TradeClass::Buy],
            action: vec![-0.5, 0.5],
        };
        let dir = tempdir().unwrap();
        let path = dir.path().join("heatmap.csv");
        write_heatmap_csv(&path, &map).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("-1,0,sell,-0.5"));
        assert!(text.contains("1,0,buy,0.5"));
    }
}
