use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::screen::GeneRanking;

const CAUSAL_FILL: &str = "#c0392b";
const NOISE_FILL: &str = "#95a5a6";
const BAR_HEIGHT: f64 = 18.0;
const GAP: f64 = 4.0;
const LABEL_WIDTH: f64 = 90.0;
const PLOT_WIDTH: f64 = 480.0;
const TOP: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChartFiles {
    pub svg: PathBuf,
    pub csv: PathBuf,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Horizontal bar chart of the `top_k` highest scores, causal genes drawn in
/// red. Writes `path` and a sidecar CSV with the same stem.
pub fn emit_importance_chart(ranking: &GeneRanking, truth: &[String], top_k: usize, path: &Path) -> Result<ChartFiles> {
    if ranking.is_empty() {
        return Err(Error::Input("cannot chart an empty ranking".into()));
    }
    let bars = ranking.top(top_k.max(1));
    let max = bars.iter().map(|e| e.score).fold(0.0_f64, f64::max);
    let height = TOP + bars.len() as f64 * (BAR_HEIGHT + GAP) + 20.0;
    let width = LABEL_WIDTH + PLOT_WIDTH + 80.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="10" y="18" font-size="14">Gene score, top {}</text>"#, bars.len());
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="24" width="10" height="10" fill="{CAUSAL_FILL}"/>"#,
        LABEL_WIDTH + PLOT_WIDTH - 130.0
    );
    let _ = writeln!(svg, r#"<text x="{}" y="33">causal</text>"#, LABEL_WIDTH + PLOT_WIDTH - 115.0);
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="24" width="10" height="10" fill="{NOISE_FILL}"/>"#,
        LABEL_WIDTH + PLOT_WIDTH - 60.0
    );
    let _ = writeln!(svg, r#"<text x="{}" y="33">noise</text>"#, LABEL_WIDTH + PLOT_WIDTH - 45.0);

    let mut csv = String::from("gene_id,score,is_causal\n");
    for (i, e) in bars.iter().enumerate() {
        let causal = truth.contains(&e.gene_id);
        let y = TOP + i as f64 * (BAR_HEIGHT + GAP);
        let w = if max > 0.0 { (e.score / max * PLOT_WIDTH).max(0.0) } else { 0.0 };
        let fill = if causal { CAUSAL_FILL } else { NOISE_FILL };
        let id = escape(&e.gene_id);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{id}</text>"#,
            LABEL_WIDTH - 6.0,
            y + BAR_HEIGHT - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{LABEL_WIDTH}" y="{y}" width="{w:.2}" height="{BAR_HEIGHT}" fill="{fill}" data-causal="{causal}"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}">{}</text>"#,
            LABEL_WIDTH + w + 4.0,
            y + BAR_HEIGHT - 5.0,
            super::format_number(e.score)
        );
        let _ = writeln!(csv, "{},{},{}", e.gene_id, super::format_number(e.score), causal);
    }
    svg.push_str("</svg>\n");

    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let csv_path = path.with_extension("csv");
    std::fs::write(path, svg)?;
    std::fs::write(&csv_path, csv)?;
    Ok(ChartFiles { svg: path.to_path_buf(), csv: csv_path })
}
