//! Description vocabularies used by the generator.
//!
//! Attribute pools are indexed by the attribute value they encode. Pools that
//! need one entry per class (cities, employers, institutions) are built by
//! combining word lists so any configured cardinality can be served.

use super::RiskFlag;

pub const FIRST_NAMES_FEMALE: [&str; 25] = [
    "mary", "patricia", "jennifer", "linda", "elizabeth", "barbara", "susan", "jessica", "sarah",
    "karen", "nancy", "lisa", "betty", "margaret", "sandra", "ashley", "kimberly", "emily",
    "donna", "michelle", "dorothy", "carol", "amanda", "melissa", "deborah",
];

pub const FIRST_NAMES_MALE: [&str; 25] = [
    "james", "robert", "john", "michael", "david", "william", "richard", "joseph", "thomas",
    "charles", "christopher", "daniel", "matthew", "anthony", "mark", "donald", "steven", "paul",
    "andrew", "joshua", "kenneth", "kevin", "brian", "george", "timothy",
];

pub const STATE_CODES: [&str; 63] = [
    "al", "ak", "az", "ar", "ca", "co", "ct", "de", "fl", "ga", "hi", "id", "il", "in", "ia", "ks",
    "ky", "la", "me", "md", "ma", "mi", "mn", "ms", "mo", "mt", "ne", "nv", "nh", "nj", "nm", "ny",
    "nc", "nd", "oh", "ok", "or", "pa", "ri", "sc", "sd", "tn", "tx", "ut", "vt", "va", "wa", "wv",
    "wi", "wy", "dc", "on", "qc", "bc", "ab", "mb", "sk", "ns", "nb", "nl", "pe", "yt", "nt",
];

const CITY_STEMS: [&str; 24] = [
    "spring", "maple", "river", "oak", "cedar", "lake", "fair", "green", "clear", "pine", "ash",
    "brook", "elm", "stone", "silver", "rock", "sun", "west", "north", "east", "glen", "mill",
    "red", "bay",
];

const CITY_SUFFIXES: [&str; 12] = [
    "field", "ville", "ton", "dale", "port", "wood", "burg", "haven", "ford", "view", "crest",
    "mont",
];

const FI_STEMS: [&str; 20] = [
    "first", "citizens", "heritage", "summit", "pioneer", "liberty", "harbor", "keystone",
    "frontier", "union", "valley", "peoples", "granite", "prairie", "coastal", "capital",
    "patriot", "horizon", "anchor", "midland",
];

const FI_KINDS: [&str; 4] = ["bank", "credit union", "savings", "trust"];

const EMPLOYER_STEMS: [&str; 20] = [
    "acme", "globex", "initech", "umbrella", "stark", "wayne", "hooli", "vandelay", "soylent",
    "cyberdyne", "tyrell", "wonka", "aperture", "massive", "oscorp", "gringotts", "duff",
    "monarch", "nakatomi", "virtucon",
];

const EMPLOYER_KINDS: [&str; 5] = ["corp", "logistics", "health", "systems", "foods"];

/// Merchants whose presence encodes gender 0 (female) and 1 (male).
pub const GENDER_MERCHANTS: [[&str; 8]; 2] = [
    [
        "bella boutique",
        "rosewood salon",
        "lulu nail spa",
        "petite closet",
        "glow cosmetics",
        "maternity mart",
        "blush beauty bar",
        "ivy yoga studio",
    ],
    [
        "ironside barber",
        "gearhead auto parts",
        "brewmaster taproom",
        "tackle box outfitters",
        "mancave sports",
        "steel gym",
        "grill kings bbq",
        "big buck hunting",
    ],
];

/// Merchants whose presence encodes the age bucket (18-19, 20s, ..., 90s).
pub const AGE_MERCHANTS: [[&str; 3]; 9] = [
    ["campus bookstore", "dorm laundry", "teen arcade"],
    ["student loan servicer", "club nightlife", "rideshare scooters"],
    ["daycare center", "baby depot", "starter home loans"],
    ["little league fees", "minivan dealer", "family dentistry"],
    ["college savings plan", "golf club dues", "orthodontics"],
    ["retirement advisor", "cruise lines", "home remodel"],
    ["medicare supplement", "rv park", "senior travel"],
    ["pharmacy refill", "hearing aid center", "assisted living"],
    ["home care aide", "nursing care", "mobility scooter"],
];

/// Lines that mark the account type: checking (0) and savings (1).
pub const ACCOUNT_TYPE_LINES: [[&str; 2]; 2] = [
    ["check paid", "checking overdraft protection"],
    ["savings interest credit", "savings withdrawal limit notice"],
];

/// Lines that mark the account profile: personal (0) and business (1).
pub const ACCOUNT_PROFILE_LINES: [[&str; 2]; 2] = [
    ["venmo cashout", "personal transfer"],
    ["merchant services deposit", "business payroll tax"],
];

/// Lines that mark debit-card ownership: no card (0) and card (1).
pub const DEBIT_CARD_LINES: [[&str; 2]; 2] = [
    ["ach bill pay", "teller withdrawal"],
    ["debit card purchase", "debit card atm withdrawal"],
];

pub const NEUTRAL_MERCHANTS: [&str; 24] = [
    "walmart",
    "target",
    "amazon mktplace",
    "costco whse",
    "shell oil",
    "exxonmobil",
    "starbucks",
    "mcdonalds",
    "kroger",
    "walgreens",
    "cvs pharmacy",
    "home depot",
    "chipotle",
    "subway",
    "dollar general",
    "safeway",
    "7-eleven",
    "uber trip",
    "lyft ride",
    "netflix.com",
    "spotify usa",
    "apple.com bill",
    "doordash",
    "best buy",
];

pub const NEUTRAL_TRANSFERS: [&str; 8] = [
    "online transfer",
    "mobile deposit",
    "atm cash deposit",
    "zelle payment",
    "paypal inst xfer",
    "wire transfer",
    "cash app",
    "ach credit",
];

pub const NEUTRAL_BILLS: [&str; 10] = [
    "comcast cable",
    "verizon wireless",
    "att bill payment",
    "state farm insurance",
    "geico auto",
    "city water utility",
    "electric company",
    "rent payment",
    "mortgage payment",
    "planet fitness",
];

pub fn first_name(name_id: usize) -> &'static str {
    if name_id < FIRST_NAMES_FEMALE.len() {
        FIRST_NAMES_FEMALE[name_id]
    } else {
        FIRST_NAMES_MALE[(name_id - FIRST_NAMES_FEMALE.len()) % FIRST_NAMES_MALE.len()]
    }
}

pub fn state_code(state_id: usize) -> String {
    if state_id < STATE_CODES.len() {
        STATE_CODES[state_id].to_string()
    } else {
        format!("st{state_id}")
    }
}

pub fn city_name(city_id: usize) -> String {
    let stem = CITY_STEMS[city_id % CITY_STEMS.len()];
    let suffix = CITY_SUFFIXES[(city_id / CITY_STEMS.len() + city_id * 5) % CITY_SUFFIXES.len()];
    let round = city_id / (CITY_STEMS.len() * CITY_SUFFIXES.len());
    if round == 0 {
        format!("{stem}{suffix}")
    } else {
        format!("{stem}{suffix}{round}")
    }
}

pub fn fi_name(fi_id: usize) -> String {
    let stem = FI_STEMS[fi_id % FI_STEMS.len()];
    let kind = FI_KINDS[(fi_id / FI_STEMS.len()) % FI_KINDS.len()];
    let round = fi_id / (FI_STEMS.len() * FI_KINDS.len());
    if round == 0 {
        format!("{stem} {kind}")
    } else {
        format!("{stem}{round} {kind}")
    }
}

/// Employer for an income tier; tiers are deciles of the income bucket.
pub fn employer(income_bucket: usize, n_buckets: usize, pick: usize) -> String {
    let tier = income_bucket * 10 / n_buckets.max(1);
    let stem = EMPLOYER_STEMS[(tier * 2 + pick % 2) % EMPLOYER_STEMS.len()];
    let kind = EMPLOYER_KINDS[tier % EMPLOYER_KINDS.len()];
    format!("{stem} {kind}")
}

pub fn risk_lines(flag: RiskFlag) -> &'static [&'static str] {
    match flag {
        RiskFlag::Nsf => &["nsf fee returned item", "insufficient funds fee"],
        RiskFlag::Stop => &["stop payment fee", "stop pmt order"],
        RiskFlag::Unauth => &["unauthorized debit claim", "dispute provisional credit"],
        RiskFlag::Frozen => &["account hold legal order", "frozen account notice"],
    }
}
