//! Synthetic multi-account transaction corpus with planted account attributes.
//!
//! Every account gets a [`LatentProfile`] (demographics, geography, banking
//! properties, risk flags). A fraction `signal_strength` of accounts is
//! "signal-bearing": their descriptions are drawn partly from attribute-coded
//! template pools, and every attribute appears at least once. All other text is
//! attribute-neutral noise, so with `signal_strength = 0` descriptions carry no
//! information about the profile at all. Amounts carry income and balance
//! information independently of the text knob.

mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, Normal, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::util::{self, Rng};
use crate::{Error, Result};

pub use templates::{city_name, fi_name, first_name, state_code};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "DEBIT")]
    Debit,
    #[serde(rename = "CREDIT")]
    Credit,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Debit => "DEBIT",
            Direction::Credit => "CREDIT",
        }
    }

    /// +1 for inflows, -1 for outflows.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Debit => -1.0,
            Direction::Credit => 1.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One bank event. The amount is always positive; the direction carries the sign.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub ts: i64,
    pub dir: Direction,
    pub amount_cents: u64,
    pub desc: String,
}

impl Transaction {
    pub fn signed_dollars(&self) -> f64 {
        self.dir.sign() * self.amount_cents as f64 / 100.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskFlag {
    Nsf,
    Stop,
    Unauth,
    Frozen,
}

impl RiskFlag {
    pub const ALL: [RiskFlag; 4] = [RiskFlag::Nsf, RiskFlag::Stop, RiskFlag::Unauth, RiskFlag::Frozen];
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskFlags {
    pub nsf: bool,
    pub stop: bool,
    pub unauth: bool,
    pub frozen: bool,
}

impl RiskFlags {
    pub fn contains(&self, flag: RiskFlag) -> bool {
        match flag {
            RiskFlag::Nsf => self.nsf,
            RiskFlag::Stop => self.stop,
            RiskFlag::Unauth => self.unauth,
            RiskFlag::Frozen => self.frozen,
        }
    }

    pub fn set(&mut self, flag: RiskFlag, on: bool) {
        match flag {
            RiskFlag::Nsf => self.nsf = on,
            RiskFlag::Stop => self.stop = on,
            RiskFlag::Unauth => self.unauth = on,
            RiskFlag::Frozen => self.frozen = on,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = RiskFlag> + '_ {
        RiskFlag::ALL.into_iter().filter(|f| self.contains(*f))
    }

    pub fn from_flags(flags: &[RiskFlag]) -> Self {
        let mut out = RiskFlags::default();
        for &f in flags {
            out.set(f, true);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountType {
    Checking,
    Savings,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountProfile {
    Personal,
    Business,
}

/// Ground-truth attributes of one account.
///
/// `first_name_id` is gender-consistent (ids below `first_names / 2` are
/// female names). `state2_id`/`city2_id` model a second, noisier geolocation
/// provider that agrees with the first with probability
/// `GeneratorConfig::provider2_agreement`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentProfile {
    pub gender: u8,
    pub first_name_id: u32,
    pub age_bucket: u32,
    pub state_id: u32,
    pub city_id: u32,
    pub state2_id: u32,
    pub city2_id: u32,
    pub income_bucket: u32,
    pub balance_bucket: u32,
    pub fi_id: u32,
    pub account_type: AccountType,
    pub account_profile: AccountProfile,
    pub has_debit_card: bool,
    pub risk_flags: RiskFlags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Cardinalities {
    pub states: u32,
    pub cities: u32,
    pub fis: u32,
    pub income_buckets: u32,
    pub balance_buckets: u32,
    pub age_buckets: u32,
    pub first_names: u32,
}

impl Default for Cardinalities {
    fn default() -> Self {
        Self {
            states: 50,
            cities: 50,
            fis: 50,
            income_buckets: 50,
            balance_buckets: 50,
            age_buckets: 9,
            first_names: 50,
        }
    }
}

/// Log-normal account-length distribution; lengths are `ceil(exp(N(mu, sigma)))`
/// clamped to `[1, max_len]`, so the integer CDF equals the continuous one at
/// every integer below the clamp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LengthDistribution {
    pub log_mean: f64,
    pub log_std: f64,
    pub max_len: usize,
}

impl Default for LengthDistribution {
    fn default() -> Self {
        // median e^mu = 60 transactions; P(len > 700) = 1 - Phi((ln 700 - mu) / sigma) ~ 0.7%.
        Self {
            log_mean: 60f64.ln(),
            log_std: 1.0,
            max_len: 5000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskRates {
    pub nsf: f64,
    pub stop: f64,
    pub unauth: f64,
    pub frozen: f64,
}

impl Default for RiskRates {
    fn default() -> Self {
        Self {
            nsf: 0.08,
            stop: 0.02,
            unauth: 0.02,
            frozen: 0.01,
        }
    }
}

impl RiskRates {
    pub fn rate(&self, flag: RiskFlag) -> f64 {
        match flag {
            RiskFlag::Nsf => self.nsf,
            RiskFlag::Stop => self.stop,
            RiskFlag::Unauth => self.unauth,
            RiskFlag::Frozen => self.frozen,
        }
    }
}

/// Description template lists. Attribute pools are indexed by attribute value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplatePools {
    pub gender_merchants: Vec<Vec<String>>,
    pub age_merchants: Vec<Vec<String>>,
    pub neutral_merchants: Vec<String>,
    pub neutral_transfers: Vec<String>,
    pub neutral_bills: Vec<String>,
}

fn owned(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Default for TemplatePools {
    fn default() -> Self {
        Self {
            gender_merchants: templates::GENDER_MERCHANTS.iter().map(|p| owned(p)).collect(),
            age_merchants: templates::AGE_MERCHANTS.iter().map(|p| owned(p)).collect(),
            neutral_merchants: owned(&templates::NEUTRAL_MERCHANTS),
            neutral_transfers: owned(&templates::NEUTRAL_TRANSFERS),
            neutral_bills: owned(&templates::NEUTRAL_BILLS),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_accounts: usize,
    pub seed: u64,
    pub length_distribution: LengthDistribution,
    /// Probability that an account's descriptions encode its attributes.
    pub signal_strength: f64,
    /// In signal-bearing accounts, the share of non-forced lines drawn from attribute pools.
    pub signal_line_rate: f64,
    pub cardinalities: Cardinalities,
    pub risk_rates: RiskRates,
    pub age_weights: Vec<f64>,
    pub female_rate: f64,
    pub debit_card_rate: f64,
    pub savings_rate: f64,
    pub business_rate: f64,
    pub provider2_agreement: f64,
    pub window_start: i64,
    pub window_days: u32,
    pub template_pools: TemplatePools,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_accounts: 1000,
            seed: 0,
            length_distribution: LengthDistribution::default(),
            signal_strength: 1.0,
            signal_line_rate: 0.6,
            cardinalities: Cardinalities::default(),
            risk_rates: RiskRates::default(),
            age_weights: vec![0.04, 0.16, 0.18, 0.17, 0.15, 0.13, 0.10, 0.05, 0.02],
            female_rate: 0.5,
            debit_card_rate: 0.7,
            savings_rate: 0.3,
            business_rate: 0.2,
            provider2_agreement: 0.85,
            // 2024-01-01T00:00:00Z
            window_start: 1_704_067_200,
            window_days: 90,
            template_pools: TemplatePools::default(),
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be in [0, 1], got {p}")))
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_accounts == 0 {
            return Err(Error::config("n_accounts must be at least 1"));
        }
        check_prob("signal_strength", self.signal_strength)?;
        check_prob("signal_line_rate", self.signal_line_rate)?;
        check_prob("female_rate", self.female_rate)?;
        check_prob("debit_card_rate", self.debit_card_rate)?;
        check_prob("savings_rate", self.savings_rate)?;
        check_prob("business_rate", self.business_rate)?;
        check_prob("provider2_agreement", self.provider2_agreement)?;
        for flag in RiskFlag::ALL {
            check_prob("risk rate", self.risk_rates.rate(flag))?;
        }
        let c = &self.cardinalities;
        if [c.states, c.cities, c.fis, c.income_buckets, c.balance_buckets].contains(&0) {
            return Err(Error::config("all cardinalities must be positive"));
        }
        if c.age_buckets == 0 || self.age_weights.len() != c.age_buckets as usize {
            return Err(Error::config(format!(
                "age_weights has {} entries for {} age buckets",
                self.age_weights.len(),
                c.age_buckets
            )));
        }
        if c.first_names < 2 || c.first_names % 2 != 0 {
            return Err(Error::config("first_names must be a positive even number"));
        }
        let pools = &self.template_pools;
        if pools.gender_merchants.len() != 2 || pools.gender_merchants.iter().any(Vec::is_empty) {
            return Err(Error::config("gender_merchants needs two non-empty pools"));
        }
        if pools.age_merchants.len() != c.age_buckets as usize
            || pools.age_merchants.iter().any(Vec::is_empty)
        {
            return Err(Error::config("age_merchants needs one non-empty pool per age bucket"));
        }
        if pools.neutral_merchants.is_empty()
            || pools.neutral_transfers.is_empty()
            || pools.neutral_bills.is_empty()
        {
            return Err(Error::config("neutral template pools must be non-empty"));
        }
        let len = &self.length_distribution;
        if !(len.log_std > 0.0) || !len.log_mean.is_finite() || len.max_len == 0 {
            return Err(Error::config("invalid length distribution"));
        }
        if self.window_days == 0 {
            return Err(Error::config("window_days must be positive"));
        }
        Ok(())
    }
}

pub fn account_id(index: usize) -> String {
    format!("acct{index:06}")
}

fn account_rng(config: &GeneratorConfig, account_id: &str) -> Rng {
    util::rng_for(config.seed, &[util::stable_hash(account_id)])
}

fn bernoulli(rng: &mut Rng, p: f64) -> bool {
    rng.gen::<f64>() < p
}

/// Draws a profile from the configured marginals.
pub fn sample_profile(rng: &mut Rng, config: &GeneratorConfig) -> LatentProfile {
    let c = &config.cardinalities;
    let gender = u8::from(!bernoulli(rng, config.female_rate));
    let half = c.first_names / 2;
    let first_name_id = gender as u32 * half + rng.gen_range(0..half);
    let age = WeightedIndex::new(&config.age_weights).expect("validated age weights");
    let age_bucket = age.sample(rng) as u32;
    let state_id = rng.gen_range(0..c.states);
    let city_id = rng.gen_range(0..c.cities);
    let state2_id = if bernoulli(rng, config.provider2_agreement) {
        state_id
    } else {
        rng.gen_range(0..c.states)
    };
    let city2_id = if bernoulli(rng, config.provider2_agreement) {
        city_id
    } else {
        rng.gen_range(0..c.cities)
    };
    let income_bucket = rng.gen_range(0..c.income_buckets);
    let balance_bucket = rng.gen_range(0..c.balance_buckets);
    let fi_id = rng.gen_range(0..c.fis);
    let account_type = if bernoulli(rng, config.savings_rate) {
        AccountType::Savings
    } else {
        AccountType::Checking
    };
    let account_profile = if bernoulli(rng, config.business_rate) {
        AccountProfile::Business
    } else {
        AccountProfile::Personal
    };
    let has_debit_card = bernoulli(rng, config.debit_card_rate);
    let mut risk_flags = RiskFlags::default();
    for flag in RiskFlag::ALL {
        risk_flags.set(flag, bernoulli(rng, config.risk_rates.rate(flag)));
    }
    LatentProfile {
        gender,
        first_name_id,
        age_bucket,
        state_id,
        city_id,
        state2_id,
        city2_id,
        income_bucket,
        balance_bucket,
        fi_id,
        account_type,
        account_profile,
        has_debit_card,
        risk_flags,
    }
}

fn validate_profile(p: &LatentProfile, config: &GeneratorConfig) -> Result<()> {
    let c = &config.cardinalities;
    let checks = [
        ("gender", p.gender as u32, 2),
        ("first_name_id", p.first_name_id, c.first_names),
        ("age_bucket", p.age_bucket, c.age_buckets),
        ("state_id", p.state_id, c.states),
        ("city_id", p.city_id, c.cities),
        ("state2_id", p.state2_id, c.states),
        ("city2_id", p.city2_id, c.cities),
        ("income_bucket", p.income_bucket, c.income_buckets),
        ("balance_bucket", p.balance_bucket, c.balance_buckets),
        ("fi_id", p.fi_id, c.fis),
    ];
    for (name, value, card) in checks {
        if value >= card {
            return Err(Error::input(format!(
                "profile field {name}={value} outside cardinality {card}"
            )));
        }
    }
    Ok(())
}

/// What a generated line is about. Only the `Neutral*` kinds occur in accounts
/// that do not carry signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LineKind {
    GenderPurchase,
    AgePurchase,
    GeoPurchase,
    Payroll,
    FiLine,
    TypeLine,
    ProfileLine,
    CardLine,
    Risk(RiskFlag),
    NeutralPurchase,
    NeutralTransfer,
    NeutralBill,
    NeutralPayroll,
}

const FORCED_KINDS: [LineKind; 7] = [
    LineKind::GenderPurchase,
    LineKind::AgePurchase,
    LineKind::Payroll,
    LineKind::FiLine,
    LineKind::TypeLine,
    LineKind::ProfileLine,
    LineKind::CardLine,
];

const SIGNAL_MIX: [(LineKind, f64); 8] = [
    (LineKind::GenderPurchase, 0.45),
    (LineKind::AgePurchase, 0.15),
    (LineKind::GeoPurchase, 0.20),
    (LineKind::Payroll, 0.04),
    (LineKind::FiLine, 0.04),
    (LineKind::TypeLine, 0.04),
    (LineKind::ProfileLine, 0.04),
    (LineKind::CardLine, 0.04),
];

const NEUTRAL_MIX: [(LineKind, f64); 4] = [
    (LineKind::NeutralPurchase, 0.62),
    (LineKind::NeutralTransfer, 0.14),
    (LineKind::NeutralBill, 0.16),
    (LineKind::NeutralPayroll, 0.08),
];

fn pick_kind(rng: &mut Rng, mix: &[(LineKind, f64)]) -> LineKind {
    let total: f64 = mix.iter().map(|(_, w)| w).sum();
    let mut u = rng.gen::<f64>() * total;
    for &(kind, w) in mix {
        if u < w {
            return kind;
        }
        u -= w;
    }
    mix[mix.len() - 1].0
}

fn lognormal_cents(rng: &mut Rng, median_dollars: f64, sigma: f64) -> u64 {
    let d = LogNormal::new(median_dollars.ln(), sigma).expect("positive sigma");
    let cents = (d.sample(rng) * 100.0).round();
    (cents as u64).max(1)
}

fn pick<'a>(rng: &mut Rng, xs: &'a [String]) -> &'a str {
    &xs[rng.gen_range(0..xs.len())]
}

fn pick_static(rng: &mut Rng, xs: &[&'static str]) -> &'static str {
    xs[rng.gen_range(0..xs.len())]
}

fn digits(rng: &mut Rng) -> String {
    format!("{:04}", rng.gen_range(0..10_000))
}

struct LineBuilder<'a> {
    config: &'a GeneratorConfig,
    profile: &'a LatentProfile,
}

impl LineBuilder<'_> {
    fn random_place(&self, rng: &mut Rng) -> String {
        let c = &self.config.cardinalities;
        format!(
            "{} {}",
            city_name(rng.gen_range(0..c.cities) as usize),
            state_code(rng.gen_range(0..c.states) as usize)
        )
    }

    fn home_place(&self) -> String {
        format!(
            "{} {}",
            city_name(self.profile.city_id as usize),
            state_code(self.profile.state_id as usize)
        )
    }

    fn payroll_cents(&self, rng: &mut Rng) -> u64 {
        let q = self.config.cardinalities.income_buckets as f64;
        let annual = 20_000.0 * (3.0 * (self.profile.income_bucket as f64 + 0.5) / q).exp();
        lognormal_cents(rng, annual / 26.0, 0.08)
    }

    fn transfer_cents(&self, rng: &mut Rng) -> u64 {
        let q = self.config.cardinalities.balance_buckets as f64;
        let scale = 40.0 * (4.0 * (self.profile.balance_bucket as f64 + 0.5) / q).exp();
        lognormal_cents(rng, scale, 0.5)
    }

    fn interest_cents(&self, rng: &mut Rng) -> u64 {
        let q = self.config.cardinalities.balance_buckets as f64;
        let balance = 200.0 * (6.0 * (self.profile.balance_bucket as f64 + 0.5) / q).exp();
        lognormal_cents(rng, balance * 0.04 / 12.0, 0.05)
    }

    fn purchase_cents(rng: &mut Rng) -> u64 {
        lognormal_cents(rng, 35.0, 0.9)
    }

    fn build(&self, kind: LineKind, rng: &mut Rng) -> (Direction, u64, String) {
        let p = self.profile;
        let pools = &self.config.template_pools;
        match kind {
            LineKind::GenderPurchase => {
                let m = pick(rng, &pools.gender_merchants[p.gender as usize]);
                (Direction::Debit, Self::purchase_cents(rng), format!("{m} {}", self.home_place()))
            }
            LineKind::AgePurchase => {
                let m = pick(rng, &pools.age_merchants[p.age_bucket as usize]);
                (Direction::Debit, Self::purchase_cents(rng), format!("{m} {}", self.home_place()))
            }
            LineKind::GeoPurchase => {
                let m = pick(rng, &pools.neutral_merchants);
                (Direction::Debit, Self::purchase_cents(rng), format!("{m} {}", self.home_place()))
            }
            LineKind::Payroll => {
                let employer = templates::employer(
                    p.income_bucket as usize,
                    self.config.cardinalities.income_buckets as usize,
                    rng.gen_range(0..2),
                );
                let name = first_name(p.first_name_id as usize);
                (Direction::Credit, self.payroll_cents(rng), format!("payroll {employer} {name}"))
            }
            LineKind::FiLine => {
                let fi = fi_name(p.fi_id as usize);
                if rng.gen_bool(0.5) {
                    (Direction::Credit, self.interest_cents(rng), format!("{fi} interest payment"))
                } else {
                    (Direction::Debit, 1200, format!("{fi} monthly service fee"))
                }
            }
            LineKind::TypeLine => {
                let idx = usize::from(p.account_type == AccountType::Savings);
                let text = pick_static(rng, &templates::ACCOUNT_TYPE_LINES[idx]);
                let dir = if idx == 1 { Direction::Credit } else { Direction::Debit };
                (dir, Self::purchase_cents(rng), format!("{text} {}", digits(rng)))
            }
            LineKind::ProfileLine => {
                let idx = usize::from(p.account_profile == AccountProfile::Business);
                let text = pick_static(rng, &templates::ACCOUNT_PROFILE_LINES[idx]);
                (Direction::Credit, self.transfer_cents(rng), text.to_string())
            }
            LineKind::CardLine => {
                let idx = usize::from(p.has_debit_card);
                let text = pick_static(rng, &templates::DEBIT_CARD_LINES[idx]);
                (Direction::Debit, Self::purchase_cents(rng), format!("{text} {}", digits(rng)))
            }
            LineKind::Risk(flag) => {
                let text = pick_static(rng, templates::risk_lines(flag));
                let (dir, cents) = match flag {
                    RiskFlag::Nsf => (Direction::Debit, 3500),
                    RiskFlag::Stop => (Direction::Debit, 3000),
                    RiskFlag::Unauth => (Direction::Credit, Self::purchase_cents(rng)),
                    RiskFlag::Frozen => (Direction::Debit, 2500),
                };
                (dir, cents, text.to_string())
            }
            LineKind::NeutralPurchase => {
                let m = pick(rng, &pools.neutral_merchants);
                let suffix = if rng.gen_bool(0.5) {
                    self.random_place(rng)
                } else {
                    digits(rng)
                };
                (Direction::Debit, Self::purchase_cents(rng), format!("{m} {suffix}"))
            }
            LineKind::NeutralTransfer => {
                let t = pick(rng, &pools.neutral_transfers);
                let dir = if rng.gen_bool(0.5) { Direction::Credit } else { Direction::Debit };
                (dir, self.transfer_cents(rng), format!("{t} {}", digits(rng)))
            }
            LineKind::NeutralBill => {
                let b = pick(rng, &pools.neutral_bills);
                (Direction::Debit, lognormal_cents(rng, 120.0, 0.6), format!("{b} {}", digits(rng)))
            }
            LineKind::NeutralPayroll => {
                (Direction::Credit, self.payroll_cents(rng), format!("payroll deposit {}", digits(rng)))
            }
        }
    }
}

fn sample_length(rng: &mut Rng, dist: &LengthDistribution) -> usize {
    let z: f64 = Normal::new(dist.log_mean, dist.log_std)
        .expect("validated length distribution")
        .sample(rng);
    let n = z.exp().ceil();
    if n.is_finite() {
        (n as usize).clamp(1, dist.max_len)
    } else {
        dist.max_len
    }
}

/// Generates one account's chronologically sorted history.
pub fn generate_account_history(
    profile: &LatentProfile,
    rng: &mut Rng,
    config: &GeneratorConfig,
) -> Result<Vec<Transaction>> {
    validate_profile(profile, config)?;
    let base_len = sample_length(rng, &config.length_distribution);
    let carries_signal = bernoulli(rng, config.signal_strength);

    let mut kinds: Vec<Option<LineKind>> = if carries_signal {
        let n_risk = profile.risk_flags.iter().count();
        let n = base_len.max(FORCED_KINDS.len()) + n_risk;
        let mut kinds = vec![None; n];
        let forced: Vec<LineKind> = FORCED_KINDS
            .iter()
            .copied()
            .chain(profile.risk_flags.iter().map(LineKind::Risk))
            .collect();
        let mut slots: Vec<usize> = (0..n).collect();
        let (chosen, _) = slots.partial_shuffle(rng, forced.len());
        for (&slot, kind) in chosen.iter().zip(forced) {
            kinds[slot] = Some(kind);
        }
        kinds
    } else {
        vec![None; base_len]
    };

    for slot in kinds.iter_mut().filter(|k| k.is_none()) {
        *slot = Some(if carries_signal && bernoulli(rng, config.signal_line_rate) {
            pick_kind(rng, &SIGNAL_MIX)
        } else {
            pick_kind(rng, &NEUTRAL_MIX)
        });
    }

    let window = config.window_days as i64 * 86_400;
    let mut stamps: Vec<i64> = (0..kinds.len())
        .map(|_| config.window_start + rng.gen_range(0..window))
        .collect();
    stamps.sort_unstable();

    let builder = LineBuilder { config, profile };
    Ok(kinds
        .into_iter()
        .zip(stamps)
        .map(|(kind, ts)| {
            let (dir, amount_cents, desc) = builder.build(kind.expect("all slots filled"), rng);
            Transaction {
                ts,
                dir,
                amount_cents,
                desc,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub account_id: String,
    pub transactions: Vec<Transaction>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub accounts: Vec<Account>,
    pub labels: BTreeMap<String, LatentProfile>,
}

/// Generates `n_accounts` accounts. Each account is seeded from
/// `(seed, account_id)` alone, so output does not depend on scheduling.
pub fn generate_corpus(config: &GeneratorConfig) -> Result<Corpus> {
    config.validate()?;
    let generated: Vec<(Account, LatentProfile)> = (0..config.n_accounts)
        .into_par_iter()
        .map(|i| {
            let id = account_id(i);
            let mut rng = account_rng(config, &id);
            let profile = sample_profile(&mut rng, config);
            let transactions = generate_account_history(&profile, &mut rng, config)?;
            Ok((
                Account {
                    account_id: id,
                    transactions,
                },
                profile,
            ))
        })
        .collect::<Result<_>>()?;
    let mut accounts = Vec::with_capacity(generated.len());
    let mut labels = BTreeMap::new();
    for (account, profile) in generated {
        labels.insert(account.account_id.clone(), profile);
        accounts.push(account);
    }
    Ok(Corpus { accounts, labels })
}

/// The 19 downstream task identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    #[serde(rename = "gender")]
    Gender,
    #[serde(rename = "1st_name")]
    FirstName,
    #[serde(rename = "age")]
    Age,
    #[serde(rename = "nsf")]
    Nsf,
    #[serde(rename = "stop")]
    Stop,
    #[serde(rename = "unauth")]
    Unauth,
    #[serde(rename = "frozen")]
    Frozen,
    #[serde(rename = "suf")]
    Suf,
    #[serde(rename = "ret")]
    Ret,
    #[serde(rename = "debit_card")]
    DebitCard,
    #[serde(rename = "inc")]
    Income,
    #[serde(rename = "bal")]
    Balance,
    #[serde(rename = "fi")]
    Fi,
    #[serde(rename = "act_type")]
    AccountType,
    #[serde(rename = "act_prof")]
    AccountProfile,
    #[serde(rename = "state_1")]
    State1,
    #[serde(rename = "city_1")]
    City1,
    #[serde(rename = "state_2")]
    State2,
    #[serde(rename = "city_2")]
    City2,
}

impl TaskId {
    pub const ALL: [TaskId; 19] = [
        TaskId::Gender,
        TaskId::FirstName,
        TaskId::Age,
        TaskId::Nsf,
        TaskId::Stop,
        TaskId::Unauth,
        TaskId::Frozen,
        TaskId::Suf,
        TaskId::Ret,
        TaskId::DebitCard,
        TaskId::Income,
        TaskId::Balance,
        TaskId::Fi,
        TaskId::AccountType,
        TaskId::AccountProfile,
        TaskId::State1,
        TaskId::City1,
        TaskId::State2,
        TaskId::City2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::Gender => "gender",
            TaskId::FirstName => "1st_name",
            TaskId::Age => "age",
            TaskId::Nsf => "nsf",
            TaskId::Stop => "stop",
            TaskId::Unauth => "unauth",
            TaskId::Frozen => "frozen",
            TaskId::Suf => "suf",
            TaskId::Ret => "ret",
            TaskId::DebitCard => "debit_card",
            TaskId::Income => "inc",
            TaskId::Balance => "bal",
            TaskId::Fi => "fi",
            TaskId::AccountType => "act_type",
            TaskId::AccountProfile => "act_prof",
            TaskId::State1 => "state_1",
            TaskId::City1 => "city_1",
            TaskId::State2 => "state_2",
            TaskId::City2 => "city_2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }

    /// Target value for this task.
    pub fn label(self, p: &LatentProfile) -> u32 {
        let f = &p.risk_flags;
        match self {
            TaskId::Gender => p.gender as u32,
            TaskId::FirstName => p.first_name_id,
            TaskId::Age => p.age_bucket,
            TaskId::Nsf => f.nsf as u32,
            TaskId::Stop => f.stop as u32,
            TaskId::Unauth => f.unauth as u32,
            TaskId::Frozen => f.frozen as u32,
            TaskId::Suf => !(f.stop || f.unauth || f.frozen) as u32,
            TaskId::Ret => (f.nsf || f.stop || f.unauth || f.frozen) as u32,
            TaskId::DebitCard => p.has_debit_card as u32,
            TaskId::Income => p.income_bucket,
            TaskId::Balance => p.balance_bucket,
            TaskId::Fi => p.fi_id,
            TaskId::AccountType => (p.account_type == AccountType::Savings) as u32,
            TaskId::AccountProfile => (p.account_profile == AccountProfile::Business) as u32,
            TaskId::State1 => p.state_id,
            TaskId::City1 => p.city_id,
            TaskId::State2 => p.state2_id,
            TaskId::City2 => p.city2_id,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-account targets for one task, keyed by task id string.
pub fn emit_labels(
    labels: &BTreeMap<String, LatentProfile>,
    task_id: &str,
) -> Result<BTreeMap<String, u32>> {
    let task = TaskId::parse(task_id)?;
    Ok(labels
        .iter()
        .map(|(id, p)| (id.clone(), task.label(p)))
        .collect())
}

/// Run metadata written as the first line of every JSON-lines artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceLine {
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct LabelsLine {
    account_id: String,
    labels: BTreeMap<String, u32>,
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

fn write_jsonl<T: Serialize>(
    path: &Path,
    provenance: Option<&Provenance>,
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut w = create(path)?;
    let mut put = |line: String| writeln!(w, "{line}").map_err(|e| Error::io(path, e));
    if let Some(p) = provenance {
        put(serde_json::to_string(&ProvenanceLine {
            provenance: p.clone(),
        })?)?;
    }
    for row in rows {
        put(serde_json::to_string(&row)?)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads data lines of a JSON-lines artifact, skipping the provenance header.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || (i == 0 && line.starts_with("{\"provenance\"")) {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::CorruptFile {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

pub fn write_corpus(path: &Path, accounts: &[Account], provenance: Option<&Provenance>) -> Result<()> {
    write_jsonl(path, provenance, accounts)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Account>> {
    read_jsonl(path)
}

pub fn write_labels(
    path: &Path,
    labels: &BTreeMap<String, LatentProfile>,
    provenance: Option<&Provenance>,
) -> Result<()> {
    let rows = label_table(labels).into_iter().map(|(account_id, labels)| LabelsLine { account_id, labels });
    write_jsonl(path, provenance, rows)
}

/// Task labels per account: `account_id -> task -> value`.
pub type LabelTable = BTreeMap<String, BTreeMap<String, u32>>;

/// Every task's target for every profile.
pub fn label_table(labels: &BTreeMap<String, LatentProfile>) -> LabelTable {
    labels
        .iter()
        .map(|(id, p)| {
            let row = TaskId::ALL.iter().map(|t| (t.as_str().to_string(), t.label(p))).collect();
            (id.clone(), row)
        })
        .collect()
}

pub fn read_labels(path: &Path) -> Result<LabelTable> {
    let rows: Vec<LabelsLine> = read_jsonl(path)?;
    Ok(rows.into_iter().map(|r| (r.account_id, r.labels)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rng_for;

    fn small(n: usize, signal: f64) -> GeneratorConfig {
        GeneratorConfig {
            n_accounts: n,
            seed: 11,
            signal_strength: signal,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn profile_is_deterministic_per_stream() {
        let cfg = GeneratorConfig::default();
        let a = sample_profile(&mut rng_for(0, &[]), &cfg);
        let b = sample_profile(&mut rng_for(0, &[]), &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn single_state_cardinality_pins_state() {
        let mut cfg = GeneratorConfig::default();
        cfg.cardinalities.states = 1;
        let mut rng = rng_for(3, &[]);
        for _ in 0..500 {
            let p = sample_profile(&mut rng, &cfg);
            assert_eq!(p.state_id, 0);
            assert_eq!(p.state2_id, 0);
        }
    }

    #[test]
    fn first_name_agrees_with_gender() {
        let cfg = GeneratorConfig::default();
        let mut rng = rng_for(5, &[]);
        for _ in 0..1000 {
            let p = sample_profile(&mut rng, &cfg);
            assert_eq!(p.first_name_id / 25, p.gender as u32);
        }
    }

    #[test]
    fn nsf_account_with_full_signal_has_nsf_line() {
        let cfg = small(1, 1.0);
        let mut rng = rng_for(9, &[]);
        for _ in 0..50 {
            let mut p = sample_profile(&mut rng, &cfg);
            p.risk_flags = RiskFlags::from_flags(&[RiskFlag::Nsf]);
            let h = generate_account_history(&p, &mut rng, &cfg).unwrap();
            let pool = templates::risk_lines(RiskFlag::Nsf);
            assert!(h.iter().any(|t| pool.contains(&t.desc.as_str())));
        }
    }

    #[test]
    fn history_is_sorted_and_valid() {
        let cfg = small(1, 0.5);
        let mut rng = rng_for(1, &[]);
        for _ in 0..200 {
            let p = sample_profile(&mut rng, &cfg);
            let h = generate_account_history(&p, &mut rng, &cfg).unwrap();
            assert!(!h.is_empty());
            assert!(h.windows(2).all(|w| w[0].ts <= w[1].ts));
            let end = cfg.window_start + cfg.window_days as i64 * 86_400;
            for t in &h {
                assert!(t.amount_cents > 0);
                assert!(!t.desc.is_empty());
                assert!(t.ts >= cfg.window_start && t.ts < end);
            }
        }
    }

    #[test]
    fn out_of_range_profile_is_rejected() {
        let cfg = GeneratorConfig::default();
        let mut rng = rng_for(1, &[]);
        let mut p = sample_profile(&mut rng, &cfg);
        p.city_id = 50;
        assert!(matches!(
            generate_account_history(&p, &mut rng, &cfg),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn corpus_cardinality_and_determinism() {
        let cfg = small(3, 1.0);
        let a = generate_corpus(&cfg).unwrap();
        assert_eq!(a.accounts.len(), 3);
        assert_eq!(a.labels.len(), 3);
        assert!(a.accounts.iter().all(|acc| !acc.transactions.is_empty()));
        let b = generate_corpus(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn derived_risk_labels() {
        let cfg = GeneratorConfig::default();
        let mut p = sample_profile(&mut rng_for(2, &[]), &cfg);
        let check = |p: &LatentProfile, expect: [u32; 6]| {
            let got = [
                TaskId::Nsf,
                TaskId::Stop,
                TaskId::Unauth,
                TaskId::Frozen,
                TaskId::Suf,
                TaskId::Ret,
            ]
            .map(|t| t.label(p));
            assert_eq!(got, expect);
        };
        p.risk_flags = RiskFlags::from_flags(&[RiskFlag::Nsf]);
        check(&p, [1, 0, 0, 0, 1, 1]);
        p.risk_flags = RiskFlags::default();
        check(&p, [0, 0, 0, 0, 1, 0]);
        p.risk_flags = RiskFlags::from_flags(&[RiskFlag::Stop, RiskFlag::Frozen]);
        check(&p, [0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn unknown_task_is_an_error() {
        let labels = BTreeMap::new();
        assert!(matches!(emit_labels(&labels, "zodiac"), Err(Error::UnknownTask(_))));
        assert!(emit_labels(&labels, "ret").unwrap().is_empty());
    }

    #[test]
    fn invalid_signal_strength_rejected() {
        let cfg = small(2, 1.5);
        assert!(matches!(generate_corpus(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn task_ids_round_trip_through_strings() {
        for t in TaskId::ALL {
            assert_eq!(TaskId::parse(t.as_str()).unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.as_str()));
        }
    }
}
