//! Per-point aggregates of a results CSV.

use std::collections::BTreeMap;

use mapf_mech::mechanism::MechanismKind;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;

use crate::batch::ResultRow;
use crate::common::CliError;

pub const SUMMARY_HEADER: &str = "# mapf-mech summary v1; ci95 = Student-t 95% half-width over instances";

#[derive(Serialize)]
struct SummaryRow {
    map: String,
    layers: usize,
    n: usize,
    mechanism: MechanismKind,
    m: usize,
    instances: usize,
    success_rate: f64,
    runtime_mean: Option<f64>,
    runtime_ci95: Option<f64>,
    social_welfare_mean: Option<f64>,
    social_welfare_ci95: Option<f64>,
    sw_ratio_fcfs: Option<f64>,
    sum_payments_mean: Option<f64>,
}

/// Half-width of the two-sided 95% Student-t interval for the mean.
pub fn ci95(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let k = xs.len() as f64;
    let t = StudentsT::new(0.0, 1.0, k - 1.0).expect("df >= 1").inverse_cdf(0.975);
    Some(t * xs.std_dev() / k.sqrt())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.mean())
}

/// Summary CSV text. Welfare statistics cover solved instances only; the
/// ratio compares them with FCFS on the same instances (ratio of means).
pub fn render(rows: &[ResultRow]) -> Result<String, CliError> {
    let mut groups: BTreeMap<(usize, MechanismKind, usize), Vec<&ResultRow>> = BTreeMap::new();
    let mut fcfs: BTreeMap<(usize, u64), f64> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n, r.mechanism, r.m)).or_default().push(r);
        if r.mechanism == MechanismKind::Fcfs {
            if let Some(sw) = r.social_welfare {
                fcfs.insert((r.n, r.instance_seed), sw);
            }
        }
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    for ((n, mechanism, m), group) in groups {
        let runtimes: Vec<f64> = group.iter().filter_map(|r| r.runtime_s).collect();
        let solved: Vec<&ResultRow> = group.iter().copied().filter(|r| r.success).collect();
        let sw: Vec<f64> = solved.iter().filter_map(|r| r.social_welfare).collect();
        let paired: Vec<(f64, f64)> = solved
            .iter()
            .filter_map(|r| Some((r.social_welfare?, *fcfs.get(&(r.n, r.instance_seed))?)))
            .collect();
        let base: f64 = paired.iter().map(|p| p.1).sum();
        let sw_ratio_fcfs = (!paired.is_empty() && base > 0.0).then(|| paired.iter().map(|p| p.0).sum::<f64>() / base);
        let payments: Vec<f64> = solved.iter().filter_map(|r| r.sum_payments).collect();
        writer.serialize(SummaryRow {
            map: group[0].map.clone(),
            layers: group[0].layers,
            n,
            mechanism,
            m,
            instances: group.len(),
            success_rate: solved.len() as f64 / group.len() as f64,
            runtime_mean: mean(&runtimes),
            runtime_ci95: ci95(&runtimes),
            social_welfare_mean: mean(&sw),
            social_welfare_ci95: ci95(&sw),
            sw_ratio_fcfs,
            sum_payments_mean: mean(&payments),
        })?;
    }
    let body = String::from_utf8(writer.into_inner().map_err(|e| CliError::Config(e.to_string()))?).expect("CSV is UTF-8");
    let body = if body.is_empty() {
        "map,layers,n,mechanism,m,instances,success_rate,runtime_mean,runtime_ci95,social_welfare_mean,social_welfare_ci95,sw_ratio_fcfs,sum_payments_mean\n".to_owned()
    } else {
        body
    };
    Ok(format!("{SUMMARY_HEADER}\n{body}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_matches_tabulated_t() {
        // t(0.975, 4) = 2.776445; sample sd of 1..=5 is sqrt(2.5).
        let h = ci95(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((h - 2.776445 * 2.5f64.sqrt() / 5f64.sqrt()).abs() < 1e-5);
        assert_eq!(ci95(&[1.0]), None);
    }
}
