//! Synthetic biography and question/answer generation.
//!
//! Persons are sampled as eight-attribute tuples, partitioned by person into
//! retain / high-count / low-count / utility splits, and verbalized into
//! six-sentence biographies plus one question per attribute. High-count
//! persons receive extra biographies rendered from fresh template draws.

mod catalog;
mod templates;

pub use catalog::{AttributeCatalog, Employer, MONTHS};
pub use templates::{render, Rendered, TemplateBank, BANK_VERSION};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::{seed, Error, Result};

const TAG_PROFILE: u64 = 1;
const TAG_SPLIT: u64 = 2;
const TAG_BIO: u64 = 3;
const TAG_UPSAMPLE: u64 = 4;

/// The six attributes that a biography states and a question can ask about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Birthday,
    BirthCity,
    University,
    Major,
    Employer,
    EmployerCity,
}

impl Attribute {
    pub const ALL: [Attribute; 6] = [
        Attribute::Birthday,
        Attribute::BirthCity,
        Attribute::University,
        Attribute::Major,
        Attribute::Employer,
        Attribute::EmployerCity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Birthday => "birthday",
            Attribute::BirthCity => "birth_city",
            Attribute::University => "university",
            Attribute::Major => "major",
            Attribute::Employer => "employer",
            Attribute::EmployerCity => "employer_city",
        }
    }

    pub fn placeholder(self) -> &'static str {
        match self {
            Attribute::Birthday => "BIRTHDAY",
            Attribute::BirthCity => "BIRTH_CITY",
            Attribute::University => "UNIVERSITY",
            Attribute::Major => "MAJOR",
            Attribute::Employer => "EMPLOYER",
            Attribute::EmployerCity => "EMPLOYER_CITY",
        }
    }

    fn from_placeholder(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.placeholder() == key)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| Error::UnknownAttribute(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pronoun {
    He,
    She,
    They,
}

impl Pronoun {
    pub const ALL: [Pronoun; 3] = [Pronoun::He, Pronoun::She, Pronoun::They];

    pub fn subject(self, capital: bool) -> &'static str {
        match (self, capital) {
            (Pronoun::He, true) => "He",
            (Pronoun::He, false) => "he",
            (Pronoun::She, true) => "She",
            (Pronoun::She, false) => "she",
            (Pronoun::They, true) => "They",
            (Pronoun::They, false) => "they",
        }
    }

    pub fn possessive(self, capital: bool) -> &'static str {
        match (self, capital) {
            (Pronoun::He, true) => "His",
            (Pronoun::He, false) => "his",
            (Pronoun::She, true) => "Her",
            (Pronoun::She, false) => "her",
            (Pronoun::They, true) => "Their",
            (Pronoun::They, false) => "their",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Birthday {
    pub day: u8,
    /// 1-based month.
    pub month: u8,
    pub year: u16,
}

impl fmt::Display for Birthday {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}, {}", MONTHS[self.month as usize - 1], self.day, self.year)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PersonProfile {
    pub id: u32,
    pub name: String,
    pub birthday: Birthday,
    pub birth_city: String,
    pub university: String,
    pub major: String,
    pub employer: String,
    pub employer_city: String,
    pub pronoun: Pronoun,
}

impl PersonProfile {
    /// The attribute value as it appears in text.
    pub fn value(&self, attr: Attribute) -> String {
        match attr {
            Attribute::Birthday => self.birthday.to_string(),
            Attribute::BirthCity => self.birth_city.clone(),
            Attribute::University => self.university.clone(),
            Attribute::Major => self.major.clone(),
            Attribute::Employer => self.employer.clone(),
            Attribute::EmployerCity => self.employer_city.clone(),
        }
    }

    pub(crate) fn placeholder_probe() -> Self {
        Self {
            id: 0,
            name: "Ada Grace Lovelace".into(),
            birthday: Birthday { day: 10, month: 12, year: 1915 },
            birth_city: "Boston, MA".into(),
            university: "Hendrix College".into(),
            major: "Physics".into(),
            employer: "Microsoft".into(),
            employer_city: "Redmond, WA".into(),
            pronoun: Pronoun::She,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Retain,
    HighCount,
    LowCount,
    Utility,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Retain, Split::HighCount, Split::LowCount, Split::Utility];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Retain => "retain",
            Split::HighCount => "high_count",
            Split::LowCount => "low_count",
            Split::Utility => "utility",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "retain" => Ok(Split::Retain),
            "high" | "high_count" => Ok(Split::HighCount),
            "low" | "low_count" => Ok(Split::LowCount),
            "utility" => Ok(Split::Utility),
            other => Err(Error::InvalidConfig(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    #[serde(rename = "BIO")]
    Bio,
    #[serde(rename = "QA")]
    Qa,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BioInstance {
    pub id: u32,
    pub person_id: u32,
    pub split: Split,
    /// Index of this copy among the person's biographies.
    pub copy: u32,
    /// Chosen template index per attribute slot.
    pub template_draw: [u16; 6],
    pub text: String,
    /// Byte range of each attribute value within `text`.
    pub spans: [[usize; 2]; 6],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaInstance {
    pub id: u32,
    pub person_id: u32,
    pub split: Split,
    pub attribute: Attribute,
    pub template_draw_id: u16,
    pub question: String,
    pub answer: String,
}

impl QaInstance {
    /// Training text: question, answer, full stop.
    pub fn text(&self) -> String {
        format!("{} {}.", self.question, self.answer)
    }
}

/// One line of `bios.jsonl` or `qa.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Instance {
    #[serde(rename = "BIO")]
    Bio(BioInstance),
    #[serde(rename = "QA")]
    Qa(QaInstance),
}

impl Instance {
    pub fn kind(&self) -> Kind {
        match self {
            Instance::Bio(_) => Kind::Bio,
            Instance::Qa(_) => Kind::Qa,
        }
    }

    pub fn id(&self) -> u32 {
        match self {
            Instance::Bio(b) => b.id,
            Instance::Qa(q) => q.id,
        }
    }

    pub fn person_id(&self) -> u32 {
        match self {
            Instance::Bio(b) => b.person_id,
            Instance::Qa(q) => q.person_id,
        }
    }

    pub fn split(&self) -> Split {
        match self {
            Instance::Bio(b) => b.split,
            Instance::Qa(q) => q.split,
        }
    }

    pub fn text(&self) -> String {
        match self {
            Instance::Bio(b) => b.text.clone(),
            Instance::Qa(q) => q.text(),
        }
    }
}

/// Draws `n` persons with unique names.
///
/// Names are rejection-sampled; after `100 * n` total draws the catalog is
/// declared too small.
pub fn sample_profiles(n: usize, catalog: &AttributeCatalog, seed: u64) -> Result<Vec<PersonProfile>> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one person".into()));
    }
    catalog.validate()?;
    let budget = 100 * n;
    let mut attempts = 0usize;
    let mut names = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let exhausted = |attempts| Error::NameSpaceExhausted {
        lists: format!(
            "first_names({}) x middle_names({}) x last_names({}) = {} names",
            catalog.first_names.len(),
            catalog.middle_names.len(),
            catalog.last_names.len(),
            catalog.name_space()
        ),
        wanted: n,
        attempts,
    };
    for id in 0..n as u32 {
        let mut rng = seed::rng(seed, &[TAG_PROFILE, id as u64]);
        let name = loop {
            if attempts >= budget {
                return Err(exhausted(attempts));
            }
            attempts += 1;
            let first = catalog.first_names.choose(&mut rng).unwrap();
            let middle = catalog.middle_names.choose(&mut rng).unwrap();
            if first == middle {
                continue;
            }
            let last = catalog.last_names.choose(&mut rng).unwrap();
            let name = format!("{first} {middle} {last}");
            if names.insert(name.clone()) {
                break name;
            }
        };
        let employer = catalog.employers.choose(&mut rng).unwrap();
        out.push(PersonProfile {
            id,
            name,
            birthday: Birthday {
                day: rng.gen_range(catalog.day_range.0..=catalog.day_range.1),
                month: rng.gen_range(1..=12),
                year: rng.gen_range(catalog.year_range.0..=catalog.year_range.1),
            },
            birth_city: catalog.cities.choose(&mut rng).unwrap().clone(),
            university: catalog.universities.choose(&mut rng).unwrap().clone(),
            major: catalog.majors.choose(&mut rng).unwrap().clone(),
            employer: employer.name.clone(),
            employer_city: employer.city.clone(),
            pronoun: *Pronoun::ALL.choose(&mut rng).unwrap(),
        });
    }
    Ok(out)
}

/// Split sizes by the largest-remainder method; ties go to the earlier split.
pub fn split_sizes(n: usize, fractions: [f64; 4]) -> Result<[usize; 4]> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| *f < 0.0 || !f.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadFractions { sum });
    }
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes = [0usize; 4];
    for (s, q) in sizes.iter_mut().zip(&quotas) {
        *s = q.floor() as usize;
    }
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    Ok(sizes)
}

/// Assigns every person to exactly one split. Returns the split per person id.
pub fn assign_splits(profiles: &[PersonProfile], fractions: [f64; 4], seed: u64) -> Result<Vec<Split>> {
    let sizes = split_sizes(profiles.len(), fractions)?;
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.shuffle(&mut seed::rng(seed, &[TAG_SPLIT]));
    let mut splits = vec![Split::Retain; profiles.len()];
    let mut cursor = 0;
    for (split, size) in Split::ALL.into_iter().zip(sizes) {
        for &p in &order[cursor..cursor + size] {
            splits[p] = split;
        }
        cursor += size;
    }
    Ok(splits)
}

fn bio_from_draw(profile: &PersonProfile, bank: &TemplateBank, draw: [u16; 6]) -> Result<(String, [[usize; 2]; 6])> {
    let mut text = String::new();
    let mut spans = [[0usize; 2]; 6];
    for attr in Attribute::ALL {
        let template = &bank.slots[attr.index()][draw[attr.index()] as usize];
        let r = render(template, profile, Some(attr))?;
        let span = r.value_span.ok_or_else(|| Error::UnresolvedPlaceholder {
            template: template.clone(),
            placeholder: attr.placeholder().into(),
        })?;
        if !text.is_empty() {
            text.push(' ');
        }
        spans[attr.index()] = [text.len() + span.start, text.len() + span.end];
        text.push_str(&r.text);
    }
    Ok((text, spans))
}

/// Draws one template per slot and renders the six-sentence biography.
pub fn verbalize_bio(
    profile: &PersonProfile,
    split: Split,
    copy: u32,
    bank: &TemplateBank,
    seed: u64,
) -> Result<BioInstance> {
    let mut rng = seed::rng(seed, &[TAG_BIO, profile.id as u64, copy as u64]);
    let mut draw = [0u16; 6];
    for (d, slot) in draw.iter_mut().zip(&bank.slots) {
        *d = rng.gen_range(0..slot.len()) as u16;
    }
    let (text, spans) = bio_from_draw(profile, bank, draw)?;
    Ok(BioInstance {
        id: 0,
        person_id: profile.id,
        split,
        copy,
        template_draw: draw,
        text,
        spans,
    })
}

/// Builds the fixed-form question about `attribute` with its exact answer.
pub fn make_qa(profile: &PersonProfile, split: Split, attribute: Attribute, bank: &TemplateBank) -> Result<QaInstance> {
    let question = render(&bank.questions[attribute.index()], profile, None)?.text;
    Ok(QaInstance {
        id: 0,
        person_id: profile.id,
        split,
        attribute,
        template_draw_id: attribute.index() as u16,
        question,
        answer: profile.value(attribute),
    })
}

/// Gives every high-count person exactly `factor` biographies.
///
/// Existing copy 0 is kept; copies `1..factor` are rendered from
/// independent template draws. Other persons are untouched.
pub fn upsample_high(
    bios: Vec<BioInstance>,
    profiles: &[PersonProfile],
    factor: u32,
    bank: &TemplateBank,
    seed: u64,
) -> Result<Vec<BioInstance>> {
    if factor == 0 {
        return Err(Error::InvalidConfig("upsample factor must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(bios.len());
    for bio in bios {
        let extra = bio.split == Split::HighCount && bio.copy == 0;
        let person = bio.person_id as usize;
        out.push(bio);
        if extra {
            for copy in 1..factor {
                let up_seed = seed::derive(seed, &[TAG_UPSAMPLE]);
                out.push(verbalize_bio(&profiles[person], Split::HighCount, copy, bank, up_seed)?);
            }
        }
    }
    Ok(out)
}

/// Knobs for [`build_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub n_persons: usize,
    /// Fractions for (retain, high-count, low-count, utility).
    pub fractions: [f64; 4],
    pub upsample_factor: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_persons: 1000,
            fractions: [0.5, 0.167, 0.167, 0.166],
            upsample_factor: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub persons: usize,
    pub bios: usize,
    pub qa: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: GenerationConfig,
    pub config_hash: String,
    pub bank_version: u32,
    pub counts: BTreeMap<Split, SplitCounts>,
}

/// All generated artifacts for one (config, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub profiles: Vec<PersonProfile>,
    /// Split per person id.
    pub splits: Vec<Split>,
    pub bios: Vec<BioInstance>,
    /// QA pairs for every person; only retain ones are training-visible.
    pub qa: Vec<QaInstance>,
    pub manifest: Manifest,
}

pub(crate) fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(&bytes))[..16].to_string()
}

impl DatasetBundle {
    pub fn split_of(&self, person_id: u32) -> Split {
        self.splits[person_id as usize]
    }

    pub fn qa_in(&self, split: Split) -> impl Iterator<Item = &QaInstance> {
        self.qa.iter().filter(move |q| q.split == split)
    }

    /// QA pairs seen during pre-training: the retain split only.
    pub fn training_qa(&self) -> Vec<&QaInstance> {
        self.qa_in(Split::Retain).collect()
    }

    pub fn persons_in(&self, split: Split) -> impl Iterator<Item = &PersonProfile> {
        self.profiles.iter().filter(move |p| self.splits[p.id as usize] == split)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_jsonl(&dir.join("profiles.jsonl"), self.profiles.iter())?;
        write_jsonl(&dir.join("bios.jsonl"), self.bios.iter().map(|b| Instance::Bio(b.clone())))?;
        write_jsonl(&dir.join("qa.jsonl"), self.qa.iter().map(|q| Instance::Qa(q.clone())))?;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let profiles: Vec<PersonProfile> = read_jsonl(&dir.join("profiles.jsonl"))?;
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut bios = Vec::new();
        for inst in read_jsonl::<Instance>(&dir.join("bios.jsonl"))? {
            if let Instance::Bio(b) = inst {
                bios.push(b);
            }
        }
        let mut qa = Vec::new();
        for inst in read_jsonl::<Instance>(&dir.join("qa.jsonl"))? {
            if let Instance::Qa(q) = inst {
                qa.push(q);
            }
        }
        let mut splits = vec![Split::Retain; profiles.len()];
        for b in &bios {
            splits[b.person_id as usize] = b.split;
        }
        Ok(Self { profiles, splits, bios, qa, manifest })
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::io::BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in file.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Runs the whole generation pipeline with the bundled catalog and bank.
pub fn build_dataset(config: &GenerationConfig, seed: u64) -> Result<DatasetBundle> {
    build_dataset_with(config, &AttributeCatalog::standard(), &TemplateBank::standard(), seed)
}

pub fn build_dataset_with(
    config: &GenerationConfig,
    catalog: &AttributeCatalog,
    bank: &TemplateBank,
    seed: u64,
) -> Result<DatasetBundle> {
    bank.validate()?;
    let profiles = sample_profiles(config.n_persons, catalog, seed)?;
    let splits = assign_splits(&profiles, config.fractions, seed)?;
    let bios = profiles
        .iter()
        .map(|p| verbalize_bio(p, splits[p.id as usize], 0, bank, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut bios = upsample_high(bios, &profiles, config.upsample_factor, bank, seed)?;
    for (i, b) in bios.iter_mut().enumerate() {
        b.id = i as u32;
    }
    let mut qa = Vec::with_capacity(profiles.len() * 6);
    for p in &profiles {
        for attr in Attribute::ALL {
            let mut q = make_qa(p, splits[p.id as usize], attr, bank)?;
            q.id = qa.len() as u32;
            qa.push(q);
        }
    }
    let mut counts: BTreeMap<Split, SplitCounts> = Split::ALL.iter().map(|s| (*s, SplitCounts::default())).collect();
    for s in &splits {
        counts.get_mut(s).unwrap().persons += 1;
    }
    for b in &bios {
        counts.get_mut(&b.split).unwrap().bios += 1;
    }
    for q in &qa {
        counts.get_mut(&q.split).unwrap().qa += 1;
    }
    let manifest = Manifest {
        seed,
        config: config.clone(),
        config_hash: hash_json(&(config, bank.version)),
        bank_version: bank.version,
        counts,
    };
    Ok(DatasetBundle { profiles, splits, bios, qa, manifest })
}

/// Re-renders a biography with the given template draw.
pub fn bio_with_draw(profile: &PersonProfile, bank: &TemplateBank, draw: [u16; 6]) -> Result<(String, [[usize; 2]; 6])> {
    bio_from_draw(profile, bank, draw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_follow_largest_remainder() {
        assert_eq!(split_sizes(10_000, [0.5, 0.167, 0.167, 0.166]).unwrap(), [5000, 1670, 1670, 1660]);
        assert_eq!(split_sizes(1000, [0.5, 0.167, 0.167, 0.166]).unwrap(), [500, 167, 167, 166]);
        assert_eq!(split_sizes(6, [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]).unwrap(), [3, 1, 1, 1]);
        assert!(matches!(split_sizes(10, [0.5; 4]), Err(Error::BadFractions { .. })));
        assert!(split_sizes(10, [1.2, -0.2, 0.0, 0.0]).is_err());
    }

    #[test]
    fn singleton_catalog_yields_the_only_profile() {
        let ps = sample_profiles(1, &AttributeCatalog::singleton(), 99).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].name, "Ada Grace Lovelace");
        assert_eq!(ps[0].birthday.to_string().split(' ').nth(1), Some("3,"));
        assert_eq!(ps[0].employer_city, "Redmond, WA");
    }

    #[test]
    fn exhausted_name_space_names_the_lists() {
        let err = sample_profiles(2, &AttributeCatalog::singleton(), 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("first_names") && msg.contains("last_names"), "{msg}");
    }

    #[test]
    fn employer_city_follows_employer() {
        let cat = AttributeCatalog::standard();
        for p in sample_profiles(300, &cat, 5).unwrap() {
            let e = cat.employers.iter().find(|e| e.name == p.employer).unwrap();
            assert_eq!(e.city, p.employer_city);
        }
    }

    #[test]
    fn qa_matches_fixed_form() {
        let mut p = PersonProfile::placeholder_probe();
        p.name = "Douglas Scott Kim".into();
        p.employer = "JPMorgan Chase".into();
        let q = make_qa(&p, Split::Retain, Attribute::Employer, &TemplateBank::standard()).unwrap();
        assert_eq!(q.question, "Which company did Douglas Scott Kim work for?");
        assert_eq!(q.answer, "JPMorgan Chase");
        assert_eq!(q.text(), "Which company did Douglas Scott Kim work for? JPMorgan Chase.");
    }

    #[test]
    fn bio_contains_employer_and_city() {
        let p = PersonProfile::placeholder_probe();
        let b = verbalize_bio(&p, Split::Retain, 0, &TemplateBank::standard(), 3).unwrap();
        assert!(b.text.contains("Microsoft") && b.text.contains("Redmond, WA"));
        for attr in Attribute::ALL {
            let [s, e] = b.spans[attr.index()];
            assert_eq!(b.text[s..e], p.value(attr));
        }
        assert_eq!(b.text.matches(". ").count() + 1, 6);
    }

    #[test]
    fn minimal_bank_ignores_seed() {
        let p = PersonProfile::placeholder_probe();
        let bank = TemplateBank::minimal();
        let a = verbalize_bio(&p, Split::Retain, 0, &bank, 1).unwrap();
        let b = verbalize_bio(&p, Split::Retain, 0, &bank, 2).unwrap();
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn redraws_vary_text_but_not_values() {
        let p = PersonProfile::placeholder_probe();
        let bank = TemplateBank::standard();
        let texts: HashSet<String> = (0..100)
            .map(|s| verbalize_bio(&p, Split::Retain, 0, &bank, s).unwrap().text)
            .inspect(|t| {
                for attr in Attribute::ALL {
                    assert!(t.contains(&p.value(attr)));
                }
            })
            .collect();
        assert!(texts.len() > 90);
    }

    #[test]
    fn unknown_attribute_is_rejected() {
        assert!(matches!("shoe size".parse::<Attribute>(), Err(Error::UnknownAttribute(_))));
        assert_eq!("birth city".parse::<Attribute>().unwrap(), Attribute::BirthCity);
    }

    #[test]
    fn minimal_bundle() {
        let cfg = GenerationConfig { n_persons: 4, fractions: [0.25; 4], upsample_factor: 1 };
        let b = build_dataset(&cfg, 0).unwrap();
        assert_eq!((b.profiles.len(), b.qa.len(), b.bios.len()), (4, 24, 4));
    }
}
