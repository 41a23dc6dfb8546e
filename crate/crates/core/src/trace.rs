//! Contact traces: parsing, summary statistics, rate estimation and a
//! synthetic generator.
//!
//! A trace is a list of pairwise contact intervals in seconds. Rates are
//! estimated as contact counts over the observation horizon and reported per
//! hour, the unit of [`NetworkSpec`].

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpreadError};
use crate::model::{GroupProfile, NetworkSpec, RateMatrix};

const SECONDS_PER_HOUR: f64 = 3600.0;

/// Mean contact duration (seconds) at which a 90 s transfer succeeds with
/// probability `1/1.15` under exponential durations.
pub fn calibrated_mean_duration(transfer_time_s: f64, expected_contacts: f64) -> f64 {
    transfer_time_s / expected_contacts.ln()
}

/// One contact interval between two nodes, in seconds since trace origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub node_a: String,
    pub node_b: String,
    pub start: f64,
    pub end: f64,
}

impl ContactRecord {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Unordered pair key.
    pub fn pair(&self) -> (String, String) {
        pair_key(&self.node_a, &self.node_b)
    }
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// CSV layout of a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceFormat {
    pub delimiter: u8,
    pub comment: u8,
}

impl Default for TraceFormat {
    fn default() -> Self {
        TraceFormat {
            delimiter: b',',
            comment: b'#',
        }
    }
}

pub const TRACE_HEADER: [&str; 4] = ["node_a", "node_b", "start_s", "end_s"];

fn parse_error(line: u64, message: impl Into<String>) -> SpreadError {
    SpreadError::Parse {
        line,
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> SpreadError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_error(line, e.to_string())
}

/// Reads a trace with header `node_a,node_b,start_s,end_s`.
///
/// Records come back sorted by start time. Overlapping intervals of the
/// same pair are merged into one, with a warning.
pub fn parse_trace<R: Read>(input: R, format: TraceFormat) -> Result<Vec<ContactRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .comment(Some(format.comment))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(parse_error(
            1,
            format!("expected header {}", TRACE_HEADER.join(",")),
        ));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64> {
            let v: f64 = row[i].parse().map_err(|_| {
                parse_error(
                    line,
                    format!("{} is not a number: {:?}", TRACE_HEADER[i], &row[i]),
                )
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(parse_error(
                    line,
                    format!("{} must be finite and >= 0", TRACE_HEADER[i]),
                ));
            }
            Ok(v)
        };
        let rec = ContactRecord {
            node_a: row[0].to_string(),
            node_b: row[1].to_string(),
            start: num(2)?,
            end: num(3)?,
        };
        if rec.node_a.is_empty() || rec.node_b.is_empty() {
            return Err(parse_error(line, "empty node id"));
        }
        if rec.node_a == rec.node_b {
            return Err(parse_error(line, format!("self contact of {}", rec.node_a)));
        }
        if rec.end < rec.start {
            return Err(parse_error(line, "end_s before start_s"));
        }
        records.push(rec);
    }
    Ok(merge_overlaps(records))
}

fn merge_overlaps(mut records: Vec<ContactRecord>) -> Vec<ContactRecord> {
    records.sort_by(|x, y| {
        x.start
            .total_cmp(&y.start)
            .then_with(|| x.pair().cmp(&y.pair()))
    });
    let mut open: HashMap<(String, String), usize> = HashMap::new();
    let mut out: Vec<ContactRecord> = Vec::with_capacity(records.len());
    for rec in records {
        let key = rec.pair();
        if let Some(&idx) = open.get(&key) {
            if rec.start <= out[idx].end {
                log::warn!(
                    "merging overlapping contacts of {}-{} at {}s",
                    key.0,
                    key.1,
                    rec.start
                );
                out[idx].end = out[idx].end.max(rec.end);
                continue;
            }
        }
        open.insert(key, out.len());
        out.push(rec);
    }
    out
}

/// Writes records in the format read by [`parse_trace`].
pub fn write_trace<W: Write>(records: &[ContactRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_error)?;
    for r in records {
        w.write_record([
            r.node_a.as_str(),
            r.node_b.as_str(),
            &r.start.to_string(),
            &r.end.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Node to group assignment. Groups are numbered from 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grouping {
    groups: BTreeMap<String, usize>,
}

impl Grouping {
    pub fn new(groups: BTreeMap<String, usize>) -> Result<Self> {
        let g = Grouping { groups };
        let sizes = g.sizes();
        if let Some(k) = sizes.iter().position(|&n| n == 0) {
            return Err(SpreadError::InvalidParameter(format!(
                "group {k} has no nodes"
            )));
        }
        Ok(g)
    }

    pub fn group_of(&self, node: &str) -> Result<usize> {
        self.groups
            .get(node)
            .copied()
            .ok_or_else(|| SpreadError::UnmappedNode(node.to_string()))
    }

    pub fn num_groups(&self) -> usize {
        self.groups.values().max().map_or(0, |&m| m + 1)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_groups()];
        for &g in self.groups.values() {
            sizes[g] += 1;
        }
        sizes
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&str, usize)> {
        self.groups.iter().map(|(n, &g)| (n.as_str(), g))
    }
}

/// Reads a grouping CSV with header `node,group`.
pub fn parse_grouping<R: Read>(input: R) -> Result<Grouping> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["node", "group"] {
        return Err(parse_error(1, "expected header node,group"));
    }
    let mut groups = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let g: usize = row[1].parse().map_err(|_| {
            parse_error(
                line,
                format!("group must be a non-negative integer: {:?}", &row[1]),
            )
        })?;
        if groups.insert(row[0].to_string(), g).is_some() {
            return Err(parse_error(line, format!("node {} listed twice", &row[0])));
        }
    }
    Grouping::new(groups)
}

pub fn write_grouping<W: Write>(grouping: &Grouping, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "group"]).map_err(csv_error)?;
    for (node, g) in grouping.nodes() {
        w.write_record([node, &g.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Summary statistics of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStats {
    /// Contacts per node.
    pub contact_counts: BTreeMap<String, usize>,
    /// Mean over contact endpoints of the number of distinct partners the
    /// endpoint is in contact with during that contact, the current partner
    /// included. Event-weighted, so at least 1 for a non-empty trace.
    pub avg_neighbors: f64,
    /// Sorted contact durations in seconds.
    pub durations: Vec<f64>,
    /// Mean gap between consecutive contact starts, for pairs with at least
    /// two contacts.
    pub intercontact_means: BTreeMap<(String, String), f64>,
}

impl TraceStats {
    /// Empirical CDF of contact durations.
    pub fn duration_cdf(&self, t: f64) -> f64 {
        if self.durations.is_empty() {
            return 0.0;
        }
        self.durations.partition_point(|&d| d <= t) as f64 / self.durations.len() as f64
    }

    /// Fraction of contacts lasting at least `t` seconds.
    pub fn fraction_at_least(&self, t: f64) -> f64 {
        if self.durations.is_empty() {
            return 0.0;
        }
        let shorter = self.durations.partition_point(|&d| d < t);
        (self.durations.len() - shorter) as f64 / self.durations.len() as f64
    }
}

pub fn trace_stats(records: &[ContactRecord]) -> TraceStats {
    let mut contact_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_node: HashMap<&str, Vec<(f64, f64, &str)>> = HashMap::new();
    let mut starts: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        *contact_counts.entry(r.node_a.clone()).or_default() += 1;
        *contact_counts.entry(r.node_b.clone()).or_default() += 1;
        per_node
            .entry(&r.node_a)
            .or_default()
            .push((r.start, r.end, &r.node_b));
        per_node
            .entry(&r.node_b)
            .or_default()
            .push((r.start, r.end, &r.node_a));
        starts.entry(r.pair()).or_default().push(r.start);
    }

    let mut lists: Vec<_> = per_node.into_values().collect();
    let (neighbor_sum, endpoints) = lists
        .par_iter_mut()
        .map(|list| {
            list.sort_by(|x, y| x.0.total_cmp(&y.0));
            let max_dur = list.iter().map(|c| c.1 - c.0).fold(0.0, f64::max);
            let mut sum = 0usize;
            let mut partners: Vec<&str> = Vec::new();
            for (i, &(s, e, p)) in list.iter().enumerate() {
                partners.clear();
                partners.push(p);
                // earlier contacts can only overlap if they started within max_dur
                for &(s2, e2, p2) in list[..i].iter().rev() {
                    if s2 < s - max_dur {
                        break;
                    }
                    if e2 >= s {
                        partners.push(p2);
                    }
                }
                for &(s2, _, p2) in &list[i + 1..] {
                    if s2 > e {
                        break;
                    }
                    partners.push(p2);
                }
                partners.sort_unstable();
                partners.dedup();
                sum += partners.len();
            }
            (sum, list.len())
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let mut durations: Vec<f64> = records.iter().map(ContactRecord::duration).collect();
    durations.sort_by(f64::total_cmp);

    let intercontact_means = starts
        .into_iter()
        .filter(|(_, s)| s.len() >= 2)
        .map(|(k, mut s)| {
            s.sort_by(f64::total_cmp);
            let mean = (s[s.len() - 1] - s[0]) / (s.len() - 1) as f64;
            (k, mean)
        })
        .collect();

    TraceStats {
        contact_counts,
        avg_neighbors: if endpoints == 0 {
            f64::NAN
        } else {
            neighbor_sum as f64 / endpoints as f64
        },
        durations,
        intercontact_means,
    }
}

fn check_horizon(horizon_s: f64) -> Result<()> {
    if horizon_s > 0.0 && horizon_s.is_finite() {
        Ok(())
    } else {
        Err(SpreadError::InvalidParameter(format!(
            "horizon {horizon_s}s must be positive"
        )))
    }
}

/// Contact rate per hour of every pair that met at least once:
/// contacts divided by the horizon. Pairs absent from the map have rate 0.
pub fn pairwise_rates(
    records: &[ContactRecord],
    horizon_s: f64,
) -> Result<BTreeMap<(String, String), f64>> {
    check_horizon(horizon_s)?;
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.pair()).or_default() += 1;
    }
    let hours = horizon_s / SECONDS_PER_HOUR;
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / hours))
        .collect())
}

/// Group rate matrix: entry `(k, l)` is the mean pairwise rate over ordered
/// pairs `a ∈ k`, `b ∈ l`, `a ≠ b`. A single-node group has diagonal 0.
pub fn group_rate_matrix(
    records: &[ContactRecord],
    grouping: &Grouping,
    horizon_s: f64,
) -> Result<RateMatrix> {
    let rates = pairwise_rates(records, horizon_s)?;
    let k = grouping.num_groups();
    let sizes = grouping.sizes();
    let mut sum = vec![vec![0.0; k]; k];
    for ((a, b), r) in &rates {
        let ga = grouping.group_of(a)?;
        let gb = grouping.group_of(b)?;
        sum[ga][gb] += r;
        sum[gb][ga] += r;
    }
    let rows = (0..k)
        .map(|x| {
            (0..k)
                .map(|y| {
                    let pairs = if x == y {
                        sizes[x] * (sizes[x] - 1)
                    } else {
                        sizes[x] * sizes[y]
                    };
                    if pairs == 0 {
                        0.0
                    } else {
                        sum[x][y] / pairs as f64
                    }
                })
                .collect()
        })
        .collect();
    RateMatrix::new(rows)
}

/// `ψ = p / avg_neighbors`, clamped to 1, where `p` is the per-contact
/// success probability (so `1/p` contacts are needed on average).
pub fn susceptibility(success_probability: f64, avg_neighbors: f64) -> Result<f64> {
    if !(avg_neighbors >= 1.0) {
        return Err(SpreadError::InvalidParameter(format!(
            "average neighbors {avg_neighbors} must be >= 1"
        )));
    }
    if !(success_probability > 0.0) {
        return Err(SpreadError::InvalidParameter(format!(
            "success probability {success_probability} must be positive"
        )));
    }
    Ok((success_probability.min(1.0) / avg_neighbors).min(1.0))
}

/// Susceptibility from trace statistics: a contact transfers the data when
/// it lasts at least `transfer_time_s`, and failed contacts are retried.
pub fn susceptibility_estimate(stats: &TraceStats, transfer_time_s: f64) -> Result<f64> {
    if !(transfer_time_s > 0.0) {
        return Err(SpreadError::InvalidParameter(format!(
            "transfer time {transfer_time_s}s must be positive"
        )));
    }
    let p = stats.fraction_at_least(transfer_time_s);
    if p == 0.0 {
        return Err(SpreadError::NoFeasibleTransfer(transfer_time_s));
    }
    susceptibility(p, stats.avg_neighbors)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntercontactStats {
    /// Mean gap between consecutive contact starts, seconds.
    pub mean: f64,
    /// Coefficient of variation of the gaps; about 1 for exponential gaps.
    pub cv: f64,
    /// Number of gaps.
    pub count: usize,
}

pub fn intercontact_stats(
    records: &[ContactRecord],
    a: &str,
    b: &str,
) -> Result<IntercontactStats> {
    let key = pair_key(a, b);
    let mut starts: Vec<f64> = records
        .iter()
        .filter(|r| r.pair() == key)
        .map(|r| r.start)
        .collect();
    if starts.len() < 2 {
        return Err(SpreadError::InsufficientContacts(
            a.to_string(),
            b.to_string(),
        ));
    }
    starts.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = starts.windows(2).map(|w| w[1] - w[0]).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
    Ok(IntercontactStats {
        mean,
        cv: if mean > 0.0 {
            var.sqrt() / mean
        } else {
            f64::NAN
        },
        count: gaps.len(),
    })
}

/// Estimated spec: group base rates from the trace, infectivity 1 and the
/// trace-wide susceptibility estimate in every group. One seed in group 0.
pub fn estimate_spec(
    records: &[ContactRecord],
    grouping: &Grouping,
    horizon_s: f64,
    transfer_time_s: f64,
) -> Result<NetworkSpec> {
    let rates = group_rate_matrix(records, grouping, horizon_s)?;
    let psi = susceptibility_estimate(&trace_stats(records), transfer_time_s)?;
    let groups = grouping
        .sizes()
        .into_iter()
        .enumerate()
        .map(|(k, n)| GroupProfile::new(n, usize::from(k == 0)).with_probabilities(1.0, psi))
        .collect();
    NetworkSpec::new(groups, rates)
}

/// Contact duration distribution of synthetic traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DurationModel {
    Exponential { mean_s: f64 },
    Fixed { seconds: f64 },
}

impl Default for DurationModel {
    /// Exponential with the mean at which a 90 s transfer needs 1.15
    /// contacts on average.
    fn default() -> Self {
        DurationModel::Exponential {
            mean_s: calibrated_mean_duration(90.0, 1.15),
        }
    }
}

impl DurationModel {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            DurationModel::Exponential { mean_s } => {
                let u: f64 = rng.gen();
                -(-u).ln_1p() * mean_s
            }
            DurationModel::Fixed { seconds } => seconds,
        }
    }
}

/// Node id used by [`generate_trace`] for node `i` of group `k`.
pub fn synthetic_node_id(group: usize, index: usize) -> String {
    format!("g{group}n{index}")
}

/// Grouping matching the node ids of [`generate_trace`].
pub fn synthetic_grouping(spec: &NetworkSpec) -> Grouping {
    let mut groups = BTreeMap::new();
    for (k, g) in spec.groups.iter().enumerate() {
        for i in 0..g.size {
            groups.insert(synthetic_node_id(k, i), k);
        }
    }
    Grouping { groups }
}

/// Synthetic trace: every pair meets as a Poisson process at its group-pair
/// base rate (per hour) over `horizon_s` seconds. Pair `(a, b)` draws from
/// its own random stream, so the output depends only on `seed`.
pub fn generate_trace(
    spec: &NetworkSpec,
    horizon_s: f64,
    durations: DurationModel,
    seed: u64,
) -> Result<Vec<ContactRecord>> {
    spec.ensure_valid()?;
    check_horizon(horizon_s)?;
    let nodes: Vec<(usize, String)> = spec
        .groups
        .iter()
        .enumerate()
        .flat_map(|(k, g)| (0..g.size).map(move |i| (k, synthetic_node_id(k, i))))
        .collect();
    let n = nodes.len();
    let mut records: Vec<ContactRecord> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let nodes = &nodes;
            let mut out = Vec::new();
            for b in a + 1..n {
                let rate = spec.rates.get(nodes[a].0, nodes[b].0) / SECONDS_PER_HOUR;
                if rate <= 0.0 {
                    continue;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((a * n + b) as u64);
                let mut t = 0.0;
                loop {
                    let u: f64 = rng.gen();
                    t += -(-u).ln_1p() / rate;
                    if t >= horizon_s {
                        break;
                    }
                    let d = durations.draw(&mut rng);
                    out.push(ContactRecord {
                        node_a: nodes[a].1.clone(),
                        node_b: nodes[b].1.clone(),
                        start: t,
                        end: t + d,
                    });
                }
            }
            out
        })
        .collect();
    records.sort_by(|x, y| x.start.total_cmp(&y.start));
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(a: &str, b: &str, s: f64, e: f64) -> ContactRecord {
        ContactRecord {
            node_a: a.into(),
            node_b: b.into(),
            start: s,
            end: e,
        }
    }

    fn parse(s: &str) -> Result<Vec<ContactRecord>> {
        parse_trace(s.as_bytes(), TraceFormat::default())
    }

    #[test]
    fn parse_basics() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("node_a,node_b,start_s,end_s\n").unwrap().is_empty());
        let r = parse("# comment\nnode_a,node_b,start_s,end_s\nb,a,10,20\nx,y,1.5,3\n").unwrap();
        assert_eq!(r, vec![rec("x", "y", 1.5, 3.0), rec("b", "a", 10.0, 20.0)]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse("node_a,node_b,start_s,end_s\na,b,1,2\na,b,5,x\n").unwrap_err();
        assert!(matches!(e, SpreadError::Parse { line: 3, .. }), "{e:?}");
        let e = parse("node_a,node_b,start_s,end_s\na,a,1,2\n").unwrap_err();
        assert!(matches!(e, SpreadError::Parse { line: 2, .. }));
        let e = parse("node_a,node_b,start_s,end_s\na,b,3,2\n").unwrap_err();
        assert!(matches!(e, SpreadError::Parse { line: 2, .. }));
        assert!(matches!(
            parse("a,b,c,d\n"),
            Err(SpreadError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn overlapping_duplicates_merge() {
        let r =
            parse("node_a,node_b,start_s,end_s\na,b,0,10\nb,a,5,15\na,b,20,30\na,c,1,2\n").unwrap();
        assert_eq!(
            r,
            vec![
                rec("a", "b", 0.0, 15.0),
                rec("a", "c", 1.0, 2.0),
                rec("a", "b", 20.0, 30.0)
            ]
        );
    }

    #[test]
    fn round_trip() {
        let r = vec![rec("n1", "n2", 0.25, 100.125)];
        let mut buf = Vec::new();
        write_trace(&r, &mut buf).unwrap();
        assert_eq!(
            parse_trace(buf.as_slice(), TraceFormat::default()).unwrap(),
            r
        );
    }

    #[test]
    fn rates_one_per_day() {
        let day = 86_400.0;
        let r: Vec<_> = (0..28)
            .map(|d| rec("a", "b", d as f64 * day, d as f64 * day + 60.0))
            .collect();
        let rates = pairwise_rates(&r, 28.0 * day).unwrap();
        assert!((rates[&("a".to_string(), "b".to_string())] - 1.0 / 24.0).abs() < 1e-15);
        assert!(!rates.contains_key(&("a".to_string(), "c".to_string())));
        assert!(pairwise_rates(&r, 0.0).is_err());
    }

    #[test]
    fn group_matrix_cases() {
        let r = vec![
            rec("a", "b", 0.0, 1.0),
            rec("c", "d", 0.0, 1.0),
            rec("a", "b", 5.0, 6.0),
        ];
        let one = Grouping::new(
            ["a", "b", "c", "d"]
                .iter()
                .map(|n| (n.to_string(), 0))
                .collect(),
        )
        .unwrap();
        let m = group_rate_matrix(&r, &one, 3600.0).unwrap();
        // 3 contacts over 6 unordered pairs, 1 hour
        assert!((m.get(0, 0) - 0.5).abs() < 1e-15);
        let two = Grouping::new(
            [("a", 0), ("b", 0), ("c", 1), ("d", 1)]
                .iter()
                .map(|(n, g)| (n.to_string(), *g))
                .collect(),
        )
        .unwrap();
        let m = group_rate_matrix(&r, &two, 3600.0).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(1, 1), 1.0);
        let partial = Grouping::new([("a".to_string(), 0)].into_iter().collect()).unwrap();
        assert!(matches!(
            group_rate_matrix(&r, &partial, 3600.0),
            Err(SpreadError::UnmappedNode(_))
        ));
    }

    #[test]
    fn neighbors_and_durations() {
        // a meets b and, overlapping, c; d-e alone
        let r = vec![
            rec("a", "b", 0.0, 10.0),
            rec("a", "c", 5.0, 20.0),
            rec("d", "e", 0.0, 100.0),
        ];
        let s = trace_stats(&r);
        // endpoints: a(b)=2, b=1, a(c)=2, c=1, d=1, e=1
        assert!((s.avg_neighbors - 8.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.contact_counts["a"], 2);
        assert_eq!(s.duration_cdf(10.0), 1.0 / 3.0);
        assert_eq!(s.fraction_at_least(15.0), 2.0 / 3.0);
    }

    #[test]
    fn susceptibility_cases() {
        let r = vec![rec("a", "b", 0.0, 200.0), rec("c", "d", 0.0, 300.0)];
        let s = trace_stats(&r);
        assert_eq!(susceptibility_estimate(&s, 90.0).unwrap(), 1.0);
        assert!(matches!(
            susceptibility_estimate(&s, 301.0),
            Err(SpreadError::NoFeasibleTransfer(_))
        ));
        let psi = susceptibility(1.0 / 1.15, 2.0).unwrap();
        assert!((psi - 0.4348).abs() < 1e-4);
    }

    #[test]
    fn intercontact() {
        let r: Vec<_> = (0..10)
            .map(|i| rec("a", "b", i as f64 * 50.0, i as f64 * 50.0 + 1.0))
            .collect();
        let s = intercontact_stats(&r, "b", "a").unwrap();
        assert_eq!(s.count, 9);
        assert!((s.mean - 50.0).abs() < 1e-12);
        assert!(s.cv.abs() < 1e-12);
        assert!(matches!(
            intercontact_stats(&r[..1], "a", "b"),
            Err(SpreadError::InsufficientContacts(..))
        ));
    }

    #[test]
    fn generator_is_deterministic_and_skips_zero_rates() {
        let spec = NetworkSpec::new(
            vec![GroupProfile::new(3, 1), GroupProfile::new(3, 0)],
            RateMatrix::new(vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap(),
        )
        .unwrap();
        let a = generate_trace(&spec, 3600.0 * 100.0, DurationModel::default(), 9).unwrap();
        let b = generate_trace(&spec, 3600.0 * 100.0, DurationModel::default(), 9).unwrap();
        assert_eq!(a, b);
        let g = synthetic_grouping(&spec);
        for r in &a {
            assert_ne!(
                g.group_of(&r.node_a).unwrap(),
                g.group_of(&r.node_b).unwrap()
            );
        }
    }

    #[test]
    fn calibration_gives_requested_contacts() {
        let mean = calibrated_mean_duration(90.0, 1.15);
        assert!((1.0 / (-90.0 / mean).exp() - 1.15).abs() < 1e-12);
    }
}
