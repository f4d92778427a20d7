//! Text rendering of a [`MetricsReport`].

use std::fmt::Write as _;

use mvtrack_core::metrics::MetricsReport;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

/// Aligned table followed by `key=value` lines.
pub fn render(r: &MetricsReport) -> String {
    let mut rows: Vec<(String, String)> = Vec::new();
    if let Some(c) = &r.cross {
        rows.push(("cvma".into(), format!("{:.6}", c.cvma.value)));
        rows.push(("cvidf1".into(), format!("{:.6}", c.cvid.f1)));
        rows.push(("cvidp".into(), format!("{:.6}", c.cvid.precision)));
        rows.push(("cvidr".into(), format!("{:.6}", c.cvid.recall)));
        rows.push(("cv_misses".into(), c.cvma.misses.to_string()));
        rows.push(("cv_false_positives".into(), c.cvma.false_positives.to_string()));
        rows.push(("cv_mismatches".into(), c.cvma.mismatches.to_string()));
    }
    rows.push(("mota".into(), format!("{:.6}", r.mota)));
    rows.push(("motp".into(), format!("{:.6}", r.motp)));
    rows.push(("idf1".into(), format!("{:.6}", r.idf1)));
    rows.push(("idp".into(), format!("{:.6}", r.idp)));
    rows.push(("idr".into(), format!("{:.6}", r.idr)));
    rows.push(("idsw".into(), r.idsw.to_string()));
    rows.push(("fm".into(), r.fm.to_string()));
    rows.push(("mt".into(), r.mt.to_string()));
    rows.push(("ml".into(), r.ml.to_string()));
    rows.push(("gt".into(), r.total.gt.to_string()));
    rows.push(("pred".into(), r.total.pred.to_string()));

    let mut s = String::new();
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &rows {
        let _ = writeln!(s, "{:<width$}  {v:>12}", k.to_uppercase());
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<6}{:>10}{:>10}{:>10}{:>6}{:>6}{:>6}{:>6}{:>8}",
        "view", "MOTA", "MOTP", "IDF1", "IDSw", "FM", "MT", "ML", "GT"
    );
    for (v, c) in r.per_view.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<6}{:>10}{:>10}{:>10.6}{:>6}{:>6}{:>6}{:>6}{:>8}",
            v,
            opt(c.mota()),
            opt(c.motp()),
            c.id_scores().f1,
            c.idsw,
            c.fm,
            c.mt,
            c.ml,
            c.gt
        );
    }
    let _ = writeln!(s);
    for (k, v) in &rows {
        let _ = writeln!(s, "{k}={v}");
    }
    for (v, c) in r.per_view.iter().enumerate() {
        let _ = writeln!(s, "view{v}_mota={}", opt(c.mota()));
        let _ = writeln!(s, "view{v}_idf1={:.6}", c.id_scores().f1);
        let _ = writeln!(s, "view{v}_idsw={}", c.idsw);
    }
    s
}
