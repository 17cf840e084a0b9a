//! Synthetic page specifications and size-based domain sharding.
//!
//! Pages are object lists (size + hostname) plus a base HTML size; the
//! sharding rewrites only move objects between hostnames. Sizes use
//! binary units throughout (1 KB = 1024 B).

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Default boundary between "small" and "large" objects (30 KB), the
/// lower end of the large-object range on the 2 MB mixed page.
pub const LARGE_OBJECT_THRESHOLD: u64 = 30 * 1024;

/// Hostname carrying the base HTML and all unsharded objects.
pub const BASE_HOST: &str = "origin.example";

#[derive(Debug, Error)]
pub enum PageError {
    #[error("unknown page preset {0:?}")]
    UnknownPreset(String),
    #[error("object {id:?} references unknown hostname {hostname:?}")]
    UnknownHost { id: String, hostname: String },
    #[error("object {id:?} has zero size")]
    ZeroSize { id: String },
    #[error("page total {actual} B deviates from declared {declared} B by more than 1%")]
    TotalMismatch { declared: u64, actual: u64 },
    #[error("infeasible total: {total} B cannot cover {count} objects and {html} B of HTML")]
    InfeasibleTotal { total: u64, count: u64, html: u64 },
    #[error("sharding preset {preset} needs at least {needed} large objects, page has {found}")]
    NotEnoughLarge { preset: char, needed: usize, found: usize },
    #[error("bad shard strategy {0:?} (expected none | by-size=<bytes> | preset=<A|B|C> | round-robin=<k>)")]
    BadStrategy(String),
}

/// One embedded object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub size: u64,
    pub hostname: String,
}

/// A synthesized page: base HTML plus an ordered object list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSpec {
    pub name: String,
    pub html_size: u64,
    pub hostnames: Vec<String>,
    pub objects: Vec<ObjectSpec>,
}

const PAGE_VERSION: &str = "page/v1";

#[derive(Serialize, Deserialize)]
struct VersionedPage {
    version: String,
    #[serde(flatten)]
    page: PageSpec,
}

impl PageSpec {
    /// Base HTML plus all object bytes.
    pub fn total_bytes(&self) -> u64 {
        self.html_size + self.objects.iter().map(|o| o.size).sum::<u64>()
    }

    pub fn validate(&self) -> Result<(), PageError> {
        let hosts: BTreeSet<&str> = self.hostnames.iter().map(String::as_str).collect();
        for o in &self.objects {
            if o.size == 0 {
                return Err(PageError::ZeroSize { id: o.id.clone() });
            }
            if !hosts.contains(o.hostname.as_str()) {
                return Err(PageError::UnknownHost {
                    id: o.id.clone(),
                    hostname: o.hostname.clone(),
                });
            }
        }
        Ok(())
    }

    /// Hostnames in first-use order: base host first, then each shard
    /// host at the position its first object appears.
    fn rebuild_hostnames(&mut self) {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        seen.insert(BASE_HOST.to_string());
        out.push(BASE_HOST.to_string());
        for o in &self.objects {
            if seen.insert(o.hostname.clone()) {
                out.push(o.hostname.clone());
            }
        }
        self.hostnames = out;
    }

    pub fn to_json(&self) -> String {
        let v = VersionedPage { version: PAGE_VERSION.to_string(), page: self.clone() };
        serde_json::to_string_pretty(&v).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, crate::characterize::FormatError> {
        let v: VersionedPage = serde_json::from_str(text)?;
        if v.version != PAGE_VERSION {
            return Err(crate::characterize::FormatError::Version {
                found: v.version,
                expected: PAGE_VERSION,
            });
        }
        Ok(v.page)
    }
}

/// The five built-in pages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PagePreset {
    /// 365 objects of 1 KB, 38 KB HTML (~400 KB total).
    P365x1K,
    /// 10 objects of 435 KB, 10 KB HTML (~4 MB total).
    P10x435K,
    /// 3 large + 133 small objects.
    M2MB,
    /// 12 large + 124 small objects, scaled to 8 MB.
    M8MB,
    /// 18 large + 118 small objects, scaled to 12 MB.
    M12MB,
}

impl PagePreset {
    pub const ALL: [PagePreset; 5] = [
        PagePreset::P365x1K,
        PagePreset::P10x435K,
        PagePreset::M2MB,
        PagePreset::M8MB,
        PagePreset::M12MB,
    ];
}

impl fmt::Display for PagePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PagePreset::P365x1K => "P365x1K",
            PagePreset::P10x435K => "P10x435K",
            PagePreset::M2MB => "M2MB",
            PagePreset::M8MB => "M8MB",
            PagePreset::M12MB => "M12MB",
        })
    }
}

impl FromStr for PagePreset {
    type Err = PageError;
    fn from_str(s: &str) -> Result<Self, PageError> {
        match s.to_ascii_uppercase().as_str() {
            "P365X1K" => Ok(PagePreset::P365x1K),
            "P10X435K" => Ok(PagePreset::P10x435K),
            "M2MB" => Ok(PagePreset::M2MB),
            "M8MB" => Ok(PagePreset::M8MB),
            "M12MB" => Ok(PagePreset::M12MB),
            _ => Err(PageError::UnknownPreset(s.to_string())),
        }
    }
}

const KB: u64 = 1024;
const MIXED_HTML_SIZE: u64 = 20 * KB;
const LARGE_HI: f64 = 620.0 * KB as f64;

/// Geometric ladder of `n` sizes spanning `[lo, hi]`.
fn geometric_ladder(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo * hi).sqrt()],
        _ => (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Builds a mixed page of `n_small` small objects on a fixed geometric
/// ladder plus `n_large` large objects laddered up to 620 KB. When a
/// total is requested, the large ladder's lower end is solved so the
/// page hits it exactly (the largest object absorbs rounding); every
/// object stays inside the 620 KB family bound and smalls stay small.
/// Large objects are spread evenly through the object list.
fn mixed_page(
    name: &str,
    n_large: usize,
    n_small: usize,
    small_range: (f64, f64),
    total: Option<u64>,
) -> PageSpec {
    let smalls = geometric_ladder(n_small, small_range.0, small_range.1);
    let larges = match total {
        None => geometric_ladder(n_large, LARGE_OBJECT_THRESHOLD as f64, LARGE_HI),
        Some(total) => {
            let small_sum: f64 = smalls.iter().sum();
            let budget = total as f64 - MIXED_HTML_SIZE as f64 - small_sum;
            assert!(
                budget <= n_large as f64 * LARGE_HI,
                "page total infeasible under the large-object cap"
            );
            // bisect the ladder's lower end so the large sizes sum to
            // the remaining budget
            let sum_for = |lo: f64| -> f64 { geometric_ladder(n_large, lo, LARGE_HI).iter().sum() };
            let (mut lo, mut hi) = (LARGE_OBJECT_THRESHOLD as f64, LARGE_HI);
            for _ in 0..64 {
                let mid = (lo + hi) / 2.0;
                if sum_for(mid) < budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            geometric_ladder(n_large, lo, LARGE_HI)
        }
    };

    let small_sizes: Vec<u64> = smalls.iter().map(|v| (v.round() as u64).max(1)).collect();
    let mut large_sizes: Vec<u64> = larges.iter().map(|v| (v.round() as u64).max(1)).collect();
    if let Some(total) = total {
        // rounding remainder lands on the largest object
        let sum: u64 = MIXED_HTML_SIZE
            + small_sizes.iter().sum::<u64>()
            + large_sizes.iter().sum::<u64>();
        let last = large_sizes.last_mut().expect("mixed page has large objects");
        *last = (*last as i64 + (total as i64 - sum as i64)).max(1) as u64;
    }

    // layout: small objects first, large ones last, both ascending --
    // the usual page shape with markup assets early and media late
    let mut sizes = Vec::with_capacity(n_large + n_small);
    sizes.extend(small_sizes);
    sizes.extend(large_sizes);

    let objects = sizes
        .into_iter()
        .enumerate()
        .map(|(i, size)| ObjectSpec {
            id: format!("obj{i:04}"),
            size,
            hostname: BASE_HOST.to_string(),
        })
        .collect();
    PageSpec {
        name: name.to_string(),
        html_size: MIXED_HTML_SIZE,
        hostnames: vec![BASE_HOST.to_string()],
        objects,
    }
}

fn uniform_page(name: &str, count: usize, size: u64, html_size: u64) -> PageSpec {
    let objects = (0..count)
        .map(|i| ObjectSpec {
            id: format!("obj{i:04}"),
            size,
            hostname: BASE_HOST.to_string(),
        })
        .collect();
    PageSpec {
        name: name.to_string(),
        html_size,
        hostnames: vec![BASE_HOST.to_string()],
        objects,
    }
}

/// Builds one of the built-in pages. All objects start on one hostname.
pub fn preset_page(preset: PagePreset) -> PageSpec {
    let page = match preset {
        PagePreset::P365x1K => uniform_page("P365x1K", 365, KB, 38 * KB),
        PagePreset::P10x435K => uniform_page("P10x435K", 10, 435 * KB, 10 * KB),
        // The 2 MB page keeps the stated per-object ranges; its three
        // large objects cannot reach a 2 MB total inside those ranges,
        // so the composition wins over the nominal total.
        PagePreset::M2MB => mixed_page("M2MB", 3, 133, (20.0, 5.0 * KB as f64), None),
        PagePreset::M8MB => {
            mixed_page("M8MB", 12, 124, (2.0 * KB as f64, 18.0 * KB as f64), Some(8 * KB * KB))
        }
        PagePreset::M12MB => {
            mixed_page("M12MB", 18, 118, (6.0 * KB as f64, 26.0 * KB as f64), Some(12 * KB * KB))
        }
    };
    debug_assert!(page.validate().is_ok());
    page
}

/// Size law for synthesized pages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeLaw {
    Uniform { bytes: u64 },
    Geometric { lo: u64, hi: u64 },
}

/// Parameters for [`synth_page`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    pub name: String,
    pub count: usize,
    pub law: SizeLaw,
    pub html_size: u64,
    /// When set, object sizes are scaled so the page total matches
    /// within 1% (exactly, after rounding absorption).
    pub total: Option<u64>,
}

/// Deterministically synthesizes a page from parameters.
pub fn synth_page(params: &SynthParams) -> Result<PageSpec, PageError> {
    let raw: Vec<f64> = match params.law {
        SizeLaw::Uniform { bytes } => vec![bytes as f64; params.count],
        SizeLaw::Geometric { lo, hi } => geometric_ladder(params.count, lo as f64, hi as f64),
    };
    let mut sizes: Vec<u64> = raw.iter().map(|v| (v.round() as u64).max(1)).collect();

    if let Some(total) = params.total {
        let needed = params.html_size + params.count as u64;
        if total < needed || (params.count == 0 && total != params.html_size) {
            return Err(PageError::InfeasibleTotal {
                total,
                count: params.count as u64,
                html: params.html_size,
            });
        }
        if params.count > 0 {
            let budget = (total - params.html_size) as f64;
            let raw_sum: f64 = raw.iter().sum();
            sizes = raw.iter().map(|v| ((v * budget / raw_sum).round() as u64).max(1)).collect();
            let sum: u64 = params.html_size + sizes.iter().sum::<u64>();
            let last = sizes.last_mut().expect("count > 0");
            *last = (*last as i64 + (total as i64 - sum as i64)).max(1) as u64;
        }
        let page_total = params.html_size + sizes.iter().sum::<u64>();
        let tolerance = total / 100;
        if page_total.abs_diff(total) > tolerance {
            return Err(PageError::TotalMismatch { declared: total, actual: page_total });
        }
    }

    let objects = sizes
        .into_iter()
        .enumerate()
        .map(|(i, size)| ObjectSpec {
            id: format!("obj{i:04}"),
            size,
            hostname: BASE_HOST.to_string(),
        })
        .collect();
    let page = PageSpec {
        name: params.name.clone(),
        html_size: params.html_size,
        hostnames: vec![BASE_HOST.to_string()],
        objects,
    };
    page.validate()?;
    Ok(page)
}

/// How to rewrite object hostnames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShardStrategy {
    /// Leave the page unchanged.
    None,
    /// Every object at or above the threshold gets its own hostname.
    BySize { threshold: u64 },
    /// Published variants on the 8 MB-shaped page: A isolates the two
    /// largest objects, B every large object, C the five largest.
    Preset(SharddingPreset),
    /// Objects cycle across `hosts` hostnames (base host included).
    RoundRobin { hosts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SharddingPreset {
    A,
    B,
    C,
}

impl fmt::Display for ShardStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShardStrategy::None => write!(f, "none"),
            ShardStrategy::BySize { threshold } => write!(f, "by-size={threshold}"),
            ShardStrategy::Preset(SharddingPreset::A) => write!(f, "preset=A"),
            ShardStrategy::Preset(SharddingPreset::B) => write!(f, "preset=B"),
            ShardStrategy::Preset(SharddingPreset::C) => write!(f, "preset=C"),
            ShardStrategy::RoundRobin { hosts } => write!(f, "round-robin={hosts}"),
        }
    }
}

impl FromStr for ShardStrategy {
    type Err = PageError;
    fn from_str(s: &str) -> Result<Self, PageError> {
        let bad = || PageError::BadStrategy(s.to_string());
        if s.eq_ignore_ascii_case("none") {
            return Ok(ShardStrategy::None);
        }
        if let Some(v) = s.strip_prefix("by-size=") {
            let threshold: u64 = v.parse().map_err(|_| bad())?;
            if threshold == 0 {
                return Err(bad());
            }
            return Ok(ShardStrategy::BySize { threshold });
        }
        if let Some(v) = s.strip_prefix("preset=") {
            return match v.to_ascii_uppercase().as_str() {
                "A" => Ok(ShardStrategy::Preset(SharddingPreset::A)),
                "B" => Ok(ShardStrategy::Preset(SharddingPreset::B)),
                "C" => Ok(ShardStrategy::Preset(SharddingPreset::C)),
                _ => Err(bad()),
            };
        }
        if let Some(v) = s.strip_prefix("round-robin=") {
            let hosts: usize = v.parse().map_err(|_| bad())?;
            if hosts == 0 {
                return Err(bad());
            }
            return Ok(ShardStrategy::RoundRobin { hosts });
        }
        Err(bad())
    }
}

fn shard_host(i: usize) -> String {
    format!("shard{i}.example")
}

/// Indices of the `k` largest objects (ties broken by page order).
fn largest_indices(page: &PageSpec, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..page.objects.len()).collect();
    idx.sort_by_key(|&i| (std::cmp::Reverse(page.objects[i].size), i));
    let mut top: Vec<usize> = idx.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

/// Rewrites object hostnames per the strategy. Object ids, sizes, and
/// order are preserved exactly.
pub fn shard(page: &PageSpec, strategy: ShardStrategy) -> Result<PageSpec, PageError> {
    page.validate()?;
    let mut out = page.clone();
    for o in &mut out.objects {
        o.hostname = BASE_HOST.to_string();
    }
    match strategy {
        ShardStrategy::None => {}
        ShardStrategy::BySize { threshold } => {
            let mut next = 1usize;
            for o in &mut out.objects {
                if o.size >= threshold {
                    o.hostname = shard_host(next);
                    next += 1;
                }
            }
        }
        ShardStrategy::Preset(preset) => {
            let large = out
                .objects
                .iter()
                .filter(|o| o.size >= LARGE_OBJECT_THRESHOLD)
                .count();
            let (letter, needed) = match preset {
                SharddingPreset::A => ('A', 2),
                SharddingPreset::B => ('B', 12),
                SharddingPreset::C => ('C', 5),
            };
            if large < needed {
                return Err(PageError::NotEnoughLarge { preset: letter, needed, found: large });
            }
            let isolate: Vec<usize> = match preset {
                // B isolates every large object; A and C the k largest.
                SharddingPreset::B => (0..out.objects.len())
                    .filter(|&i| out.objects[i].size >= LARGE_OBJECT_THRESHOLD)
                    .collect(),
                SharddingPreset::A => largest_indices(&out, 2),
                SharddingPreset::C => largest_indices(&out, 5),
            };
            for (n, i) in isolate.into_iter().enumerate() {
                out.objects[i].hostname = shard_host(n + 1);
            }
        }
        ShardStrategy::RoundRobin { hosts } => {
            for (i, o) in out.objects.iter_mut().enumerate() {
                let slot = i % hosts;
                if slot > 0 {
                    o.hostname = shard_host(slot);
                }
            }
        }
    }
    out.rebuild_hostnames();
    debug_assert!(out.validate().is_ok());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p365_is_exact() {
        let p = preset_page(PagePreset::P365x1K);
        assert_eq!(p.objects.len(), 365);
        assert!(p.objects.iter().all(|o| o.size == 1024));
        assert_eq!(p.html_size, 38 * 1024);
        // ~400 KB total
        assert!(p.total_bytes().abs_diff(400 * 1024) <= 400 * 1024 / 25);
    }

    #[test]
    fn p10x435_is_exact() {
        let p = preset_page(PagePreset::P10x435K);
        assert_eq!(p.objects.len(), 10);
        assert!(p.objects.iter().all(|o| o.size == 435 * 1024));
    }

    #[test]
    fn m8mb_totals_and_composition() {
        let p = preset_page(PagePreset::M8MB);
        assert_eq!(p.objects.len(), 136);
        let declared = 8 * 1024 * 1024;
        assert!(
            p.total_bytes().abs_diff(declared) <= declared / 100,
            "total {}",
            p.total_bytes()
        );
        let large = p.objects.iter().filter(|o| o.size >= LARGE_OBJECT_THRESHOLD).count();
        assert_eq!(large, 12);
    }

    #[test]
    fn m12mb_has_18_large() {
        let p = preset_page(PagePreset::M12MB);
        assert_eq!(p.objects.len(), 136);
        let declared = 12 * 1024 * 1024;
        assert!(p.total_bytes().abs_diff(declared) <= declared / 100);
        let large = p.objects.iter().filter(|o| o.size >= LARGE_OBJECT_THRESHOLD).count();
        assert_eq!(large, 18);
    }

    #[test]
    fn m2mb_composition() {
        let p = preset_page(PagePreset::M2MB);
        assert_eq!(p.objects.len(), 136);
        let large: Vec<u64> = p
            .objects
            .iter()
            .map(|o| o.size)
            .filter(|&s| s >= LARGE_OBJECT_THRESHOLD)
            .collect();
        assert_eq!(large.len(), 3);
        assert!(large.iter().all(|&s| (30 * 1024..=620 * 1024).contains(&s)));
        let smalls = p.objects.iter().filter(|o| o.size < LARGE_OBJECT_THRESHOLD);
        assert!(smalls.clone().all(|o| o.size >= 20 && o.size <= 5 * 1024));
    }

    #[test]
    fn synth_uniform_matches_preset_shape() {
        let params = SynthParams {
            name: "t".into(),
            count: 10,
            law: SizeLaw::Uniform { bytes: 435 * 1024 },
            html_size: 10 * 1024,
            total: None,
        };
        let p = synth_page(&params).unwrap();
        let preset = preset_page(PagePreset::P10x435K);
        let sizes: Vec<u64> = p.objects.iter().map(|o| o.size).collect();
        let preset_sizes: Vec<u64> = preset.objects.iter().map(|o| o.size).collect();
        assert_eq!(sizes, preset_sizes);
        assert_eq!(p.html_size, preset.html_size);
        // determinism
        assert_eq!(synth_page(&params).unwrap(), p);
    }

    #[test]
    fn synth_count_zero_is_base_only() {
        let p = synth_page(&SynthParams {
            name: "base".into(),
            count: 0,
            law: SizeLaw::Uniform { bytes: 1 },
            html_size: 2048,
            total: None,
        })
        .unwrap();
        assert!(p.objects.is_empty());
        assert_eq!(p.total_bytes(), 2048);
    }

    #[test]
    fn synth_infeasible_total() {
        let r = synth_page(&SynthParams {
            name: "t".into(),
            count: 100,
            law: SizeLaw::Uniform { bytes: 10 },
            html_size: 1024,
            total: Some(512),
        });
        assert!(matches!(r, Err(PageError::InfeasibleTotal { .. })));
    }

    #[test]
    fn preset_b_on_m8mb_gives_13_hostnames() {
        let p = preset_page(PagePreset::M8MB);
        let sharded = shard(&p, ShardStrategy::Preset(SharddingPreset::B)).unwrap();
        assert_eq!(sharded.hostnames.len(), 13);
        for o in &sharded.objects {
            if o.size < LARGE_OBJECT_THRESHOLD {
                assert_eq!(o.hostname, BASE_HOST);
            } else {
                assert_ne!(o.hostname, BASE_HOST);
            }
        }
    }

    #[test]
    fn by_size_equals_preset_b_at_default_threshold() {
        let p = preset_page(PagePreset::M8MB);
        let a = shard(&p, ShardStrategy::BySize { threshold: LARGE_OBJECT_THRESHOLD }).unwrap();
        let isolated = a.hostnames.len() - 1;
        assert_eq!(isolated, 12);
    }

    #[test]
    fn by_size_above_everything_is_identity_up_to_naming() {
        let p = preset_page(PagePreset::P10x435K);
        let max = p.objects.iter().map(|o| o.size).max().unwrap();
        let s = shard(&p, ShardStrategy::BySize { threshold: max + 1 }).unwrap();
        assert_eq!(s.hostnames, vec![BASE_HOST.to_string()]);
        assert!(s.objects.iter().all(|o| o.hostname == BASE_HOST));
    }

    #[test]
    fn round_robin_spreads_objects() {
        let p = preset_page(PagePreset::P10x435K);
        let s = shard(&p, ShardStrategy::RoundRobin { hosts: 10 }).unwrap();
        assert_eq!(s.hostnames.len(), 10);
        for host in &s.hostnames {
            let n = s.objects.iter().filter(|o| &o.hostname == host).count();
            assert_eq!(n, 1);
        }
    }

    #[test]
    fn preset_requirements_enforced() {
        let p = preset_page(PagePreset::P365x1K); // no large objects
        assert!(matches!(
            shard(&p, ShardStrategy::Preset(SharddingPreset::A)),
            Err(PageError::NotEnoughLarge { preset: 'A', .. })
        ));
    }

    #[test]
    fn strategies_parse() {
        assert_eq!("none".parse::<ShardStrategy>().unwrap(), ShardStrategy::None);
        assert_eq!(
            "by-size=30720".parse::<ShardStrategy>().unwrap(),
            ShardStrategy::BySize { threshold: 30720 }
        );
        assert_eq!(
            "preset=b".parse::<ShardStrategy>().unwrap(),
            ShardStrategy::Preset(SharddingPreset::B)
        );
        assert_eq!(
            "round-robin=6".parse::<ShardStrategy>().unwrap(),
            ShardStrategy::RoundRobin { hosts: 6 }
        );
        assert!("by-size=0".parse::<ShardStrategy>().is_err());
    }

    #[test]
    fn page_file_round_trips() {
        let p = preset_page(PagePreset::M2MB);
        let json = p.to_json();
        assert!(json.contains("page/v1"));
        assert_eq!(PageSpec::from_json(&json).unwrap(), p);
    }

    proptest! {
        /// Sharding preserves the multiset of sizes (here: the exact
        /// sequence, since order is preserved too) and the page total.
        #[test]
        fn shard_preserves_sizes(threshold in 1u64..2_000_000, hosts in 1usize..20) {
            for preset in PagePreset::ALL {
                let page = preset_page(preset);
                for strategy in [
                    ShardStrategy::None,
                    ShardStrategy::BySize { threshold },
                    ShardStrategy::RoundRobin { hosts },
                ] {
                    let sharded = shard(&page, strategy).unwrap();
                    let before: Vec<(&str, u64)> =
                        page.objects.iter().map(|o| (o.id.as_str(), o.size)).collect();
                    let after: Vec<(&str, u64)> =
                        sharded.objects.iter().map(|o| (o.id.as_str(), o.size)).collect();
                    prop_assert_eq!(before, after);
                    prop_assert_eq!(page.total_bytes(), sharded.total_bytes());
                }
            }
        }

        /// Hostname count after by-size sharding is 1 + #objects >= T.
        #[test]
        fn by_size_hostname_count(threshold in 1u64..2_000_000) {
            let page = preset_page(PagePreset::M8MB);
            let sharded = shard(&page, ShardStrategy::BySize { threshold }).unwrap();
            let isolated = page.objects.iter().filter(|o| o.size >= threshold).count();
            prop_assert_eq!(sharded.hostnames.len(), 1 + isolated);
        }
    }
}
