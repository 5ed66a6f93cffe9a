use std::fmt::Write;

use super::{Candidate, CandidateStatus, ThreatHeatmap};

/// Posterior grid as CSV: one line per grid row (y = 0 first), one value per column.
pub fn heatmap_csv(heatmap: &ThreatHeatmap) -> String {
    let w = heatmap.width() as usize;
    let mut out = String::with_capacity(heatmap.len() * 9);
    for y in 0..heatmap.height() as usize {
        for x in 0..w {
            if x > 0 {
                out.push(',');
            }
            write!(out, "{:.6}", heatmap.posterior(y * w + x)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Candidate table with a header line.
pub fn candidates_csv(candidates: &[Candidate], width: u32) -> String {
    let mut out = String::from("id,cell,x,y,posterior,status,class,p_ied,p_eo,p_landmine\n");
    for c in candidates {
        let p = c.class_posterior();
        let class = match c.status {
            CandidateStatus::Classified => format!("{:?}", c.best_class().0).to_lowercase(),
            _ => String::new(),
        };
        let status = serde_json::to_value(c.status).unwrap();
        writeln!(
            out,
            "{},{},{},{},{:.6},{},{},{:.6},{:.6},{:.6}",
            c.id,
            c.cell,
            c.cell % width as usize,
            c.cell / width as usize,
            c.posterior,
            status.as_str().unwrap(),
            class,
            p[0],
            p[1],
            p[2]
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let h = ThreatHeatmap::new(3, 2, vec![0.02; 6]);
        let csv = heatmap_csv(&h);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "0.020000,0.020000,0.020000");
    }

    #[test]
    fn candidate_rows() {
        let c = Candidate::new(4, 7, 0.75, None);
        let csv = candidates_csv(&[c], 3);
        assert_eq!(csv.lines().nth(1).unwrap(), "4,7,1,2,0.750000,suspected,,0.333333,0.333333,0.333333");
    }
}
