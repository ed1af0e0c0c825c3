//! Splitting-scheme coefficients: the embedded eighth-order RKN families,
//! palindromic closure and unfolding into flow schedules, coefficient norms,
//! and the plain-text coefficient file format.
//!
//! Coefficients are stored as exact decimals (see [`Decimal`]). Only the
//! independent half of each palindrome is kept; the central "closure" entry is
//! always recomputed so that the unfolded drift and kick coefficients sum to
//! one.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use crate::decimal::Decimal;
use crate::error::{Error, Result};
use crate::schedule::{Flow, FlowKind, FlowSchedule};

/// Tolerance on the consistency sums and on explicitly supplied closure
/// entries.
pub const CONSISTENCY_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Palindrome starting and ending with a drift.
    Aba,
    /// Palindrome starting and ending with a kick.
    Bab,
    /// Palindromic composition of Strang kernels with weights `gammas`.
    SsComposition,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Aba => "ABA",
            SchemeKind::Bab => "BAB",
            SchemeKind::SsComposition => "SS",
        })
    }
}

/// Values published alongside a scheme. Informational only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchemeMetadata {
    pub effective_error: Option<f64>,
    pub delta_1norm: Option<f64>,
    pub delta_maxnorm: Option<f64>,
    /// Which coefficient attains `delta_maxnorm`, e.g. `a9`.
    pub delta_argmax: Option<String>,
    /// Where the coefficients came from (`builtin` or a file path).
    pub source: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeCoefficients {
    pub name: String,
    pub kind: SchemeKind,
    /// Force evaluations per step (ABA/BAB, with FSAL) or number of kernels (SS).
    pub stages: usize,
    pub order: u32,
    a_free: Vec<Decimal>,
    b_free: Vec<Decimal>,
    gamma_free: Vec<Decimal>,
    pub metadata: SchemeMetadata,
}

/// Length of the full palindromic a- and b-lists.
fn list_lengths(kind: SchemeKind, stages: usize) -> (usize, usize) {
    match kind {
        SchemeKind::Aba => (stages + 1, stages),
        SchemeKind::Bab => (stages, stages + 1),
        SchemeKind::SsComposition => (0, 0),
    }
}

/// Number of independent entries of a palindrome of length `n` whose sum is 1.
fn free_count(n: usize) -> usize {
    if n == 0 {
        0
    } else if n % 2 == 1 {
        n / 2
    } else {
        n / 2 - 1
    }
}

/// Closure entry: the centre `1 - 2 sum` for odd lengths, or the last half
/// entry `1/2 - sum` for even lengths.
fn closure(free: &[Decimal], n: usize) -> Decimal {
    let s: Decimal = free.iter().sum();
    if n % 2 == 1 {
        Decimal::ONE - s * 2
    } else {
        Decimal::HALF - s
    }
}

/// Half list including the closure entry.
fn half_with_closure(free: &[Decimal], n: usize) -> Vec<Decimal> {
    if n == 0 {
        return Vec::new();
    }
    let mut half = free.to_vec();
    half.push(closure(free, n));
    half
}

/// Full palindrome of length `n`.
fn mirror(free: &[Decimal], n: usize) -> Vec<Decimal> {
    let half = half_with_closure(free, n);
    let mut full = half.clone();
    let skip = if n % 2 == 1 { 1 } else { 0 };
    full.extend(half.iter().rev().skip(skip));
    full
}

/// Accept either the independent entries or the independent entries plus an
/// explicit closure, which is then checked.
fn split_closure(name: &str, label: &str, mut given: Vec<Decimal>, n: usize) -> Result<Vec<Decimal>> {
    let want = free_count(n);
    if given.len() == want {
        return Ok(given);
    }
    if n > 0 && given.len() == want + 1 {
        let supplied = given.pop().unwrap();
        let computed = closure(&given, n);
        let gap = (supplied - computed).abs().to_f64();
        if gap > CONSISTENCY_TOL {
            return Err(Error::InconsistentScheme {
                name: name.to_string(),
                reason: format!("{label}-coefficients do not sum to 1 (closure entry off by {gap:e})"),
            });
        }
        return Ok(given);
    }
    Err(Error::InconsistentScheme {
        name: name.to_string(),
        reason: format!(
            "expected {want} independent {label}-coefficients (or {} with closure), got {}",
            want + 1,
            given.len()
        ),
    })
}

impl SchemeCoefficients {
    /// Build a splitting (`Aba`/`Bab`) scheme from its independent coefficients.
    /// A trailing closure entry may be included and is validated.
    pub fn splitting(
        name: impl Into<String>,
        kind: SchemeKind,
        stages: usize,
        order: u32,
        a: Vec<Decimal>,
        b: Vec<Decimal>,
    ) -> Result<Self> {
        let name = name.into();
        if kind == SchemeKind::SsComposition {
            return Err(Error::UnsupportedKind(kind.to_string()));
        }
        if stages == 0 {
            return Err(Error::InconsistentScheme { name, reason: "zero stages".into() });
        }
        let (na, nb) = list_lengths(kind, stages);
        let a_free = split_closure(&name, "a", a, na)?;
        let b_free = split_closure(&name, "b", b, nb)?;
        Ok(SchemeCoefficients {
            name,
            kind,
            stages,
            order,
            a_free,
            b_free,
            gamma_free: Vec::new(),
            metadata: SchemeMetadata::default(),
        })
    }

    /// Build a palindromic composition of `stages` Strang kernels.
    pub fn composition(name: impl Into<String>, stages: usize, order: u32, gammas: Vec<Decimal>) -> Result<Self> {
        let name = name.into();
        if stages == 0 {
            return Err(Error::InconsistentScheme { name, reason: "zero kernels".into() });
        }
        let gamma_free = split_closure(&name, "gamma", gammas, stages)?;
        Ok(SchemeCoefficients {
            name,
            kind: SchemeKind::SsComposition,
            stages,
            order,
            a_free: Vec::new(),
            b_free: Vec::new(),
            gamma_free,
            metadata: SchemeMetadata::default(),
        })
    }

    pub fn with_metadata(mut self, metadata: SchemeMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    /// Half of the a-palindrome, closure entry last (`a_1, ..., a_centre`).
    pub fn a_half(&self) -> Vec<f64> {
        let (na, _) = list_lengths(self.kind, self.stages);
        half_with_closure(&self.a_free, na).into_iter().map(Decimal::to_f64).collect()
    }

    pub fn b_half(&self) -> Vec<f64> {
        let (_, nb) = list_lengths(self.kind, self.stages);
        half_with_closure(&self.b_free, nb).into_iter().map(Decimal::to_f64).collect()
    }

    pub fn gamma_half(&self) -> Vec<f64> {
        half_with_closure(&self.gamma_free, self.gamma_len()).into_iter().map(Decimal::to_f64).collect()
    }

    fn gamma_len(&self) -> usize {
        if self.kind == SchemeKind::SsComposition {
            self.stages
        } else {
            0
        }
    }

    /// Exact independent coefficients as stored (no closure).
    pub fn free_coefficients(&self) -> (&[Decimal], &[Decimal], &[Decimal]) {
        (&self.a_free, &self.b_free, &self.gamma_free)
    }

    /// Full unfolded a-list, each entry rounded once from the exact decimal.
    pub fn a_full(&self) -> Vec<f64> {
        let (na, _) = list_lengths(self.kind, self.stages);
        mirror(&self.a_free, na).into_iter().map(Decimal::to_f64).collect()
    }

    pub fn b_full(&self) -> Vec<f64> {
        let (_, nb) = list_lengths(self.kind, self.stages);
        mirror(&self.b_free, nb).into_iter().map(Decimal::to_f64).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        mirror(&self.gamma_free, self.gamma_len()).into_iter().map(Decimal::to_f64).collect()
    }

    /// Full palindromic flow sequence in application order (first entry acts
    /// first on the state).
    pub fn unfold(&self) -> Result<FlowSchedule> {
        let a = self.a_full();
        let b = self.b_full();
        let (outer, inner, outer_kind, inner_kind) = match self.kind {
            SchemeKind::Aba => (a, b, FlowKind::Drift, FlowKind::Kick),
            SchemeKind::Bab => (b, a, FlowKind::Kick, FlowKind::Drift),
            SchemeKind::SsComposition => return Err(Error::UnsupportedKind(self.kind.to_string())),
        };
        let mut entries = Vec::with_capacity(outer.len() + inner.len());
        for (i, &c) in outer.iter().enumerate() {
            entries.push(Flow { kind: outer_kind, coeff: c });
            if let Some(&d) = inner.get(i) {
                entries.push(Flow { kind: inner_kind, coeff: d });
            }
        }
        FlowSchedule::new(entries).map_err(|e| match e {
            Error::InconsistentScheme { reason, .. } => Error::InconsistentScheme { name: self.name.clone(), reason },
            other => other,
        })
    }
}

/// Strang kernel used inside an SS composition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrangKernel {
    /// half drift, kick, half drift
    Aba,
    /// half kick, drift, half kick
    Bab,
}

/// Flatten `S(gamma_m h) o ... o S(gamma_1 h)` into one schedule, merging the
/// adjacent half flows at kernel boundaries.
pub fn composition_schedule(gammas: &[f64], kernel: StrangKernel) -> Result<FlowSchedule> {
    let (edge, mid) = match kernel {
        StrangKernel::Aba => (FlowKind::Drift, FlowKind::Kick),
        StrangKernel::Bab => (FlowKind::Kick, FlowKind::Drift),
    };
    let mut entries = Vec::with_capacity(3 * gammas.len());
    for &g in gammas {
        entries.push(Flow { kind: edge, coeff: 0.5 * g });
        entries.push(Flow { kind: mid, coeff: g });
        entries.push(Flow { kind: edge, coeff: 0.5 * g });
    }
    FlowSchedule::new(entries)
}

/// Schedule for any registered scheme; SS compositions use the given kernel.
pub fn schedule_for(scheme: &SchemeCoefficients, kernel: StrangKernel) -> Result<FlowSchedule> {
    match scheme.kind {
        SchemeKind::SsComposition => composition_schedule(&scheme.gammas(), kernel),
        _ => scheme.unfold(),
    }
}

/// 1-norm and max-norm of the unfolded coefficient vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientNorms {
    pub delta_1: f64,
    pub delta_max: f64,
    /// Label of the first coefficient attaining `delta_max`, e.g. `a9`.
    pub argmax: String,
}

/// Sums run over the full palindrome, not just the tabulated half.
pub fn coefficient_norms(scheme: &SchemeCoefficients) -> CoefficientNorms {
    // (label, value) in unfolded order
    let mut labelled: Vec<(String, f64)> = Vec::new();
    match scheme.kind {
        SchemeKind::Aba | SchemeKind::Bab => {
            let a = scheme.a_full();
            let b = scheme.b_full();
            let label = |p: &str, j: usize, n: usize| format!("{p}{}", j.min(n - 1 - j) + 1);
            let (outer, inner, po, pi) =
                if scheme.kind == SchemeKind::Aba { (&a, &b, "a", "b") } else { (&b, &a, "b", "a") };
            for (i, &c) in outer.iter().enumerate() {
                labelled.push((label(po, i, outer.len()), c));
                if let Some(&d) = inner.get(i) {
                    labelled.push((label(pi, i, inner.len()), d));
                }
            }
        }
        SchemeKind::SsComposition => {
            let sched = composition_schedule(&scheme.gammas(), StrangKernel::Aba)
                .expect("gammas of a validated composition are consistent");
            for (i, f) in sched.entries().iter().enumerate() {
                let p = match f.kind {
                    FlowKind::Drift => "drift",
                    FlowKind::Kick => "kick",
                };
                labelled.push((format!("{p}@{}", i + 1), f.coeff));
            }
        }
    }
    let delta_1 = labelled.iter().map(|(_, c)| c.abs()).sum();
    let mut best = 0usize;
    for (i, (_, c)) in labelled.iter().enumerate() {
        if c.abs() > labelled[best].1.abs() {
            best = i;
        }
    }
    CoefficientNorms { delta_1, delta_max: labelled[best].1.abs(), argmax: labelled[best].0.clone() }
}

struct Embedded {
    name: &'static str,
    kind: SchemeKind,
    stages: usize,
    a: &'static [&'static str],
    b: &'static [&'static str],
    effective_error: f64,
    delta_1: f64,
    delta_max: f64,
    argmax: &'static str,
}

const EMBEDDED: &[Embedded] = &[
    Embedded {
        name: "A17",
        kind: SchemeKind::Aba,
        stages: 17,
        a: &[
            "0.0520924343840339006426037968353",
            "0.225287493267702165807274831864",
            "0.416276189612257117795363856737",
            "-0.384567270213950399652168569029",
            "0.0997271783470514816674547589369",
            "-0.108833834399100218757003157958",
            "0.222010736648991680848341975522",
            "0.523879522036734296002247438223",
        ],
        b: &[
            "0.145850304812644731608096609877",
            "0.255156544139293944162028807345",
            "0.0181334688208317251361460684041",
            "-0.179040110299264554587007062749",
            "-0.118470801433302245053382954342",
            "0.186461689273821083344937258279",
            "0.459041581767136840219244627361",
            "-0.003660836270318358975321459399",
        ],
        effective_error: 3.45,
        delta_1: 8.42,
        delta_max: 0.5459,
        argmax: "a9",
    },
    Embedded {
        name: "A18",
        kind: SchemeKind::Aba,
        stages: 18,
        a: &[
            "0.0866003822712445920135805954462",
            "-0.0231572735424388070228714693753",
            "0.191410576083774088999564416369",
            "0.378895558692931579545387584925",
            "-0.0467359566364556111599485526051",
            "-0.156198111997810415438979605642",
            "0.156025836895094823718831871041",
            "0.252844012473796333586850465807",
            "-0.640644212172254239866860564270",
        ],
        b: &[
            "-0.08",
            "0.209460550048243262121199483001",
            "0.274887805875735483503233064415",
            "-0.224214208870409561366168655624",
            "0.347657740563761656321390026010",
            "-0.168783183866211679175007668385",
            "0.144209344805460873709120777707",
            "0.0116851121360265483381405054244",
        ],
        effective_error: 3.65,
        delta_1: 7.42,
        delta_max: 0.6406,
        argmax: "a9",
    },
    Embedded {
        name: "A19",
        kind: SchemeKind::Aba,
        stages: 19,
        a: &[
            "0.0505805",
            "0.149999",
            "-0.0551795510771615573511026950361",
            "0.423755898835337951482264998051",
            "-0.213495353584659048059672194633",
            "-0.0680769774574032619111630736274",
            "0.227917056974013435948887201671",
            "-0.235373619381058906524740047732",
            "0.387413869179878047816794031058",
        ],
        b: &[
            "0.129478606560536730662493794395",
            "0.222257260092671143423043559581",
            "-0.0577514893325147204757023246320",
            "-0.0578312262103924910221345032763",
            "0.103087297437175356747933252265",
            "-0.140819612554090768205554103887",
            "0.0234462603492826276699713718626",
            "0.134854517356684096617882205068",
            "0.0287973821073779306345172160211",
        ],
        effective_error: 2.76,
        delta_1: 5.98,
        delta_max: 0.4237,
        argmax: "a4",
    },
    Embedded {
        name: "B17",
        kind: SchemeKind::Bab,
        stages: 17,
        a: &[
            "0.160227696073839513690970240076",
            "0.306354507436867319879440957100",
            "0.308395508895171191756544975556",
            "0.120362086566233408450063177659",
            "-0.622888687549183872072186218718",
            "0.635560951632990078378672016548",
            "-0.144226974795419229640437363913",
            "-0.284867527074173816678992817545",
        ],
        b: &[
            "0.0514196142537210073343152693459",
            "0.250497030318342871458417941091",
            "0.512412268300327350035492806653",
            "-0.231597138650894401279645184364",
            "0.116091323536875759881216298975",
            "-0.0098365173246965763985763034283",
            "-0.108032771466281638634277563747",
            "0.249039864198023642002940910070",
        ],
        effective_error: 2.80,
        delta_1: 8.93,
        delta_max: 0.6355,
        argmax: "a5",
    },
    Embedded {
        name: "B18",
        kind: SchemeKind::Bab,
        stages: 18,
        a: &[
            "0.144410089394373457971755553148",
            "0.911935520865154315536815857376",
            "-0.00072932909837392655161199996844",
            "-0.930317101800698721159455541447",
            "0.253804074671714046593439154323",
            "0.147948981530918626913598733391",
            "-0.448814759614614928125216243784",
            "0.0824123980794580106751237195418",
        ],
        b: &[
            "0.045",
            "0.459016679491512416807266107555",
            "-0.0456553445594333153223655352757",
            "0.0457031020401841003192648096559",
            "-0.216814341025322492810152535338",
            "0.163168264552484857133047358600",
            "-0.0857080319814376219389850039430",
            "0.0265745810650523466142922093591",
            "-0.0365538332992893220147096150675",
        ],
        effective_error: 3.44,
        delta_1: 9.68,
        delta_max: 0.9303,
        argmax: "a4",
    },
    Embedded {
        name: "B19",
        kind: SchemeKind::Bab,
        stages: 19,
        a: &[
            "0.337548675291317241942440116575",
            "-0.223647977575409990331768222380",
            "0.168949714872223740906385138015",
            "0.171179938816205886154783136334",
            "-0.349765168067292877221144631312",
            "0.523808861006312397712070357524",
            "-0.194208871063049124066394765282",
            "-0.323496751337931087309823477561",
            "0.322817287614899749216601693799",
        ],
        b: &[
            "0.036132460472136313416730168194",
            "0.012697863961074113381675193011",
            "0.201318391240629276109068041836",
            "0.135683350134504233201330671671",
            "-0.0579071833999963041504740663015",
            "-0.0772509501792649549463874931821",
            "-0.00264758266409925952822161203471",
            "-0.0329844384945603065320797537355",
            "0.0476781560950366927530646289755",
        ],
        effective_error: 3.41,
        delta_1: 6.94,
        delta_max: 0.5238,
        argmax: "a6",
    },
];

/// Names of the eighth-order RKN schemes shipped with the library.
pub const RKN8_SCHEMES: [&str; 6] = ["A17", "A18", "A19", "B17", "B18", "B19"];

/// Immutable collection of named schemes.
#[derive(Clone, Debug, Default)]
pub struct SchemeRegistry {
    schemes: BTreeMap<String, SchemeCoefficients>,
}

impl SchemeRegistry {
    /// Registry holding the embedded schemes plus both Strang kernels.
    pub fn builtin() -> Self {
        let mut reg = SchemeRegistry::default();
        for e in EMBEDDED {
            let parse =
                |xs: &[&str]| -> Vec<Decimal> { xs.iter().map(|s| s.parse().expect("embedded coefficient")).collect() };
            let scheme = SchemeCoefficients::splitting(e.name, e.kind, e.stages, 8, parse(e.a), parse(e.b))
                .expect("embedded scheme is consistent")
                .with_metadata(SchemeMetadata {
                    effective_error: Some(e.effective_error),
                    delta_1norm: Some(e.delta_1),
                    delta_maxnorm: Some(e.delta_max),
                    delta_argmax: Some(e.argmax.to_string()),
                    source: Some("builtin".into()),
                });
            reg.insert(scheme);
        }
        for (name, kind) in [("STRANG_ABA", SchemeKind::Aba), ("STRANG_BAB", SchemeKind::Bab)] {
            let s = SchemeCoefficients::splitting(name, kind, 1, 2, vec![], vec![])
                .expect("Strang kernel")
                .with_metadata(SchemeMetadata { source: Some("builtin".into()), ..Default::default() });
            reg.insert(s);
        }
        reg
    }

    pub fn insert(&mut self, scheme: SchemeCoefficients) {
        self.schemes.insert(scheme.name.to_ascii_uppercase(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<&SchemeCoefficients> {
        self.schemes.get(&name.to_ascii_uppercase()).ok_or_else(|| Error::UnknownScheme(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.schemes.values().map(|s| s.name.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &SchemeCoefficients> {
        self.schemes.values()
    }
}

fn builtin_registry() -> &'static SchemeRegistry {
    static REGISTRY: OnceLock<SchemeRegistry> = OnceLock::new();
    REGISTRY.get_or_init(SchemeRegistry::builtin)
}

/// Look up one of the built-in schemes (`A17` ... `B19`, `STRANG_ABA`, `STRANG_BAB`).
pub fn build_scheme(name: &str) -> Result<SchemeCoefficients> {
    builtin_registry().get(name).cloned()
}

/// Parse the line-oriented coefficient format:
///
/// ```text
/// # comment
/// name  MY_SCHEME        (optional)
/// kind  ABA | BAB | SS
/// order 8
/// stages 17
/// a 0.052...             (ABA/BAB, index order, closure entry omitted)
/// b 0.145...
/// gamma 0.39...          (SS only)
/// ```
pub fn parse_coefficients(text: &str, source: &str) -> Result<SchemeCoefficients> {
    let mut name = None;
    let mut kind = None;
    let mut order = None;
    let mut stages = None;
    let (mut a, mut b, mut g) = (Vec::new(), Vec::new(), Vec::new());

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let perr = |message: String| Error::Parse { line: line_no, message };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap();
        let value = parts.next().ok_or_else(|| perr(format!("`{key}` needs a value")))?;
        if let Some(extra) = parts.next() {
            return Err(perr(format!("unexpected token `{extra}`")));
        }
        let number = |v: &str| -> Result<Decimal> { v.parse().map_err(|e| perr(format!("{e}"))) };
        let integer =
            |v: &str| -> Result<usize> { v.parse().map_err(|_| perr(format!("`{v}` is not a positive integer"))) };
        match key.to_ascii_lowercase().as_str() {
            "name" => name = Some(value.to_string()),
            "kind" => {
                kind = Some(match value.to_ascii_uppercase().as_str() {
                    "ABA" => SchemeKind::Aba,
                    "BAB" => SchemeKind::Bab,
                    "SS" => SchemeKind::SsComposition,
                    other => return Err(perr(format!("unknown kind `{other}`"))),
                })
            }
            "order" => order = Some(integer(value)? as u32),
            "stages" => stages = Some(integer(value)?),
            "a" => a.push(number(value)?),
            "b" => b.push(number(value)?),
            "gamma" => g.push(number(value)?),
            other => return Err(perr(format!("unknown key `{other}`"))),
        }
    }

    let missing = |what: &str| Error::Parse { line: 0, message: format!("missing `{what}` line") };
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let order = order.ok_or_else(|| missing("order"))?;
    let stages = stages.ok_or_else(|| missing("stages"))?;
    let name = name.unwrap_or_else(|| {
        Path::new(source).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| source.to_string())
    });

    let scheme = match kind {
        SchemeKind::SsComposition => {
            if !a.is_empty() || !b.is_empty() {
                return Err(Error::Parse { line: 0, message: "SS schemes take only `gamma` lines".into() });
            }
            SchemeCoefficients::composition(name, stages, order, g)?
        }
        _ => {
            if !g.is_empty() {
                return Err(Error::Parse { line: 0, message: "`gamma` lines are only valid for kind SS".into() });
            }
            SchemeCoefficients::splitting(name, kind, stages, order, a, b)?
        }
    };
    Ok(scheme.with_metadata(SchemeMetadata { source: Some(source.to_string()), ..Default::default() }))
}

pub fn load_external(path: impl AsRef<Path>) -> Result<SchemeCoefficients> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
    parse_coefficients(&text, &path.display().to_string())
}

/// Write a scheme in the coefficient file format, exact decimals, closure omitted.
pub fn encode(scheme: &SchemeCoefficients) -> String {
    let mut out = String::new();
    out.push_str(&format!("name {}\n", scheme.name));
    out.push_str(&format!("kind {}\n", scheme.kind));
    out.push_str(&format!("order {}\n", scheme.order));
    out.push_str(&format!("stages {}\n", scheme.stages));
    let (a, b, g) = scheme.free_coefficients();
    for x in a {
        out.push_str(&format!("a {x}\n"));
    }
    for x in b {
        out.push_str(&format!("b {x}\n"));
    }
    for x in g {
        out.push_str(&format!("gamma {x}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a17_first_coefficient_matches_table() {
        let s = build_scheme("A17").unwrap();
        assert_eq!(s.a_half()[0], 0.052_092_434_384_033_9);
        assert_eq!(s.a_half().len(), 9);
        assert_eq!(s.b_half().len(), 9);
    }

    #[test]
    fn a17_closure_is_centre_drift() {
        let s = build_scheme("A17").unwrap();
        // oracle: 1/2 minus the eight tabulated a-values, summed in f64
        let tab: f64 = EMBEDDED[0].a.iter().map(|x| x.parse::<f64>().unwrap()).sum();
        let a9 = s.a_half()[8];
        assert!((a9 - (0.5 - tab)).abs() < 1e-15);
        assert!((a9 + 0.545872).abs() < 1e-6);
        assert_eq!(format!("{:.4}", a9.abs()), "0.5459");
    }

    #[test]
    fn strang_aba_by_inspection() {
        let s = build_scheme("STRANG_ABA").unwrap();
        assert_eq!(s.a_half(), vec![0.5]);
        assert_eq!(s.b_half(), vec![1.0]);
        assert_eq!(s.stages, 1);
        let sched = s.unfold().unwrap();
        assert_eq!(
            sched.entries(),
            &[
                Flow { kind: FlowKind::Drift, coeff: 0.5 },
                Flow { kind: FlowKind::Kick, coeff: 1.0 },
                Flow { kind: FlowKind::Drift, coeff: 0.5 },
            ]
        );
        let n = coefficient_norms(&s);
        assert_eq!((n.delta_1, n.delta_max), (2.0, 1.0));
    }

    #[test]
    fn unknown_scheme() {
        assert_eq!(build_scheme("C17"), Err(Error::UnknownScheme("C17".into())));
        assert!(build_scheme("a17").is_ok());
    }

    #[test]
    fn unfold_counts() {
        let a17 = build_scheme("A17").unwrap().unfold().unwrap();
        assert_eq!(a17.len(), 35);
        assert_eq!(a17.drifts(), 18);
        assert_eq!(a17.kicks(), 17);
        assert_eq!(a17.stages(), 17);
        assert!(a17.fsal_mergeable());

        let b17s = build_scheme("B17").unwrap();
        let b17 = b17s.unfold().unwrap();
        assert_eq!(b17.len(), 35);
        assert_eq!(b17.drifts(), 17);
        assert_eq!(b17.kicks(), 18);
        assert_eq!(b17.stages(), 17);
        // centre drift: 1 - 2 * sum of the eight tabulated a-values
        let tab: f64 = EMBEDDED[3].a.iter().map(|x| x.parse::<f64>().unwrap()).sum();
        let centre = b17.entries()[17];
        assert_eq!(centre.kind, FlowKind::Drift);
        assert!((centre.coeff - (1.0 - 2.0 * tab)).abs() < 1e-15);
    }

    #[test]
    fn unfolded_sequences_are_palindromic_and_consistent() {
        for name in RKN8_SCHEMES.iter().chain(["STRANG_ABA", "STRANG_BAB"].iter()) {
            let s = build_scheme(name).unwrap();
            let sched = s.unfold().unwrap();
            let e = sched.entries();
            for i in 0..e.len() {
                assert_eq!(e[i], e[e.len() - 1 - i], "{name} at {i}");
            }
            let sa: f64 = s.a_full().iter().sum();
            let sb: f64 = s.b_full().iter().sum();
            assert!((sa - 1.0).abs() <= CONSISTENCY_TOL, "{name}: {sa}");
            assert!((sb - 1.0).abs() <= CONSISTENCY_TOL, "{name}: {sb}");
        }
    }

    #[test]
    fn norms_for_a17_and_a19() {
        let a17 = coefficient_norms(&build_scheme("A17").unwrap());
        assert!((a17.delta_1 - 8.42).abs() < 0.01);
        assert!((a17.delta_max - 0.5459).abs() < 0.0001);
        assert_eq!(a17.argmax, "a9");
        let a19 = coefficient_norms(&build_scheme("A19").unwrap());
        assert!((a19.delta_1 - 5.98).abs() < 0.01);
        assert!((a19.delta_max - 0.4237).abs() < 0.0001);
        assert_eq!(a19.argmax, "a4");
    }

    #[test]
    fn encode_round_trip_is_bit_exact() {
        for name in RKN8_SCHEMES {
            let s = build_scheme(name).unwrap();
            let back = parse_coefficients(&encode(&s), "mem").unwrap();
            assert_eq!(back.name, s.name);
            assert_eq!(back.free_coefficients(), s.free_coefficients());
            assert_eq!(back.unfold().unwrap(), s.unfold().unwrap());
        }
    }

    #[test]
    fn explicit_closure_is_validated() {
        let ok = "kind ABA\norder 2\nstages 1\na 0.5\nb 1\n";
        let s = parse_coefficients(ok, "mem").unwrap();
        assert_eq!(s.unfold().unwrap(), build_scheme("STRANG_ABA").unwrap().unfold().unwrap());

        let bad = "kind ABA\norder 2\nstages 1\na 0.4\nb 1\n";
        assert!(matches!(parse_coefficients(bad, "mem"), Err(Error::InconsistentScheme { .. })));
    }

    #[test]
    fn ss_file_with_symmetric_gammas() {
        // Yoshida's triple jump written as a 3-kernel composition
        let text = "# triple jump\nkind SS\norder 4\nstages 3\ngamma 1.3512071919596576340476878089715\n";
        let s = parse_coefficients(text, "yoshida.txt").unwrap();
        assert_eq!(s.kind, SchemeKind::SsComposition);
        assert_eq!(s.name, "yoshida");
        let g = s.gammas();
        assert_eq!(g.len(), 3);
        assert_eq!(g[0], g[2]);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(s.unfold().is_err());
        let sched = schedule_for(&s, StrangKernel::Aba).unwrap();
        assert_eq!(sched.kicks(), 3);
        assert_eq!(sched.len(), 7);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_coefficients("kind ABA\norder x\n", "mem").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_coefficients("kind XYZ\n", "mem").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_coefficients("kind ABA\norder 2\n", "mem").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
        let e = parse_coefficients("kind ABA\norder 2\nstages 3\na 0.1\na 0.2\na 0.3\n", "mem").unwrap_err();
        assert!(matches!(e, Error::InconsistentScheme { .. }));
    }
}
