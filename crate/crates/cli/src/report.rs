use meanfield_stats::MetaReport;

/// `•`, `••` or `•••` for p below 0.05, 0.01 or 0.001.
pub fn significance_dots(p: f64) -> &'static str {
    if p < 0.001 {
        "•••"
    } else if p < 0.01 {
        "••"
    } else if p < 0.05 {
        "•"
    } else {
        ""
    }
}

/// One aligned row per dataset followed by the meta-effect row.
pub fn format_report(report: &MetaReport) -> String {
    let width = report
        .datasets
        .iter()
        .map(|d| d.dataset.chars().count())
        .max()
        .unwrap_or(0)
        .max("meta-effect".len());
    let mut out = format!(
        "{} vs {} (SMD > 0 favours {})\n",
        report.pipeline_b, report.pipeline_a, report.pipeline_b
    );
    out += &format!(
        "{:<width$}  {:>4}  {:>7}  {:>18}  {:>9}  {}\n",
        "dataset", "n", "SMD", "95% CI", "p", "sig"
    );
    for d in &report.datasets {
        let smd = if d.degenerate_effect {
            format!("{:>6.3}*", d.smd)
        } else {
            format!("{:>7.3}", d.smd)
        };
        out += &format!(
            "{:<width$}  {:>4}  {}  [{:>7.3}, {:>7.3}]  {:>9.2e}  {}\n",
            d.dataset,
            d.n_subjects,
            smd,
            d.ci_low,
            d.ci_high,
            d.p_value,
            significance_dots(d.p_value)
        );
    }
    out += &format!(
        "{:<width$}  {:>4}  {:>7.3}  {:>18}  {:>9.2e}  {}\n",
        "meta-effect",
        "",
        report.meta_smd,
        "",
        report.combined_p,
        significance_dots(report.combined_p)
    );
    if report.datasets.iter().any(|d| d.degenerate_effect) {
        out += "* no spread in the paired differences; SMD reported as 0\n";
    }
    out
}
