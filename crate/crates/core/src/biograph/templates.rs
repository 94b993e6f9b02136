//! Sentence templates for biographies and questions.
//!
//! A biography is six sentences, one per [`Attribute`] slot, always in the
//! same order. Each slot template names its attribute with exactly one
//! placeholder that is preceded by at least one word, so a biography can be
//! cut immediately before any attribute value.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use super::{Attribute, PersonProfile};
use crate::{Error, Result};

pub const BANK_VERSION: u32 = 1;

/// Versioned set of biography slot templates and question templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateBank {
    pub version: u32,
    /// One list per attribute slot, indexed by `Attribute::index()`.
    pub slots: Vec<Vec<String>>,
    /// The fixed training question form per attribute.
    pub questions: Vec<String>,
    /// Alternative phrasings used only for paraphrased evaluation.
    pub paraphrases: Vec<Vec<String>>,
}

/// A template rendered for one person.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    /// Byte range of the attribute value, if the template carries one.
    pub value_span: Option<Range<usize>>,
}

fn owned(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl TemplateBank {
    pub fn standard() -> Self {
        Self {
            version: BANK_VERSION,
            slots: vec![
                owned(BIRTHDAY),
                owned(BIRTH_CITY),
                owned(UNIVERSITY),
                owned(MAJOR),
                owned(EMPLOYER),
                owned(EMPLOYER_CITY),
            ],
            questions: owned(&QUESTIONS),
            paraphrases: PARAPHRASES.iter().map(|p| owned(p)).collect(),
        }
    }

    /// A bank with a single template per slot.
    pub fn minimal() -> Self {
        let std = Self::standard();
        Self {
            slots: std.slots.iter().map(|s| vec![s[0].clone()]).collect(),
            ..std
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.len() != 6 || self.questions.len() != 6 || self.paraphrases.len() != 6 {
            return Err(Error::InvalidConfig("template bank must cover six attributes".into()));
        }
        let probe = PersonProfile::placeholder_probe();
        for attr in Attribute::ALL {
            let slot = &self.slots[attr.index()];
            if slot.is_empty() {
                return Err(Error::InvalidConfig(format!("no templates for {}", attr.as_str())));
            }
            for t in slot {
                let r = render(t, &probe, Some(attr))?;
                let span = r.value_span.ok_or_else(|| Error::UnresolvedPlaceholder {
                    template: t.clone(),
                    placeholder: attr.placeholder().into(),
                })?;
                if r.text[..span.start].trim().is_empty() {
                    return Err(Error::InvalidConfig(format!("template {t:?} starts with its value")));
                }
            }
            for q in std::iter::once(&self.questions[attr.index()]).chain(&self.paraphrases[attr.index()]) {
                render(q, &probe, None)?;
            }
        }
        Ok(())
    }
}

/// Fills `{NAME}`, pronoun and attribute placeholders from `profile`.
///
/// When `value_of` is given, the byte span of that attribute's value in the
/// output is returned as well.
pub fn render(template: &str, profile: &PersonProfile, value_of: Option<Attribute>) -> Result<Rendered> {
    let mut out = String::with_capacity(template.len() + 32);
    let mut span = None;
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..].find('}').ok_or_else(|| Error::UnresolvedPlaceholder {
            template: template.to_string(),
            placeholder: rest[open + 1..].to_string(),
        })? + open;
        let key = &rest[open + 1..close];
        let value: String = match key {
            "NAME" => profile.name.clone(),
            "Pronoun" => profile.pronoun.subject(true).into(),
            "pronoun" => profile.pronoun.subject(false).into(),
            "Possessive" => profile.pronoun.possessive(true).into(),
            "possessive" => profile.pronoun.possessive(false).into(),
            _ => match Attribute::from_placeholder(key) {
                Some(attr) => {
                    let v = profile.value(attr);
                    if value_of == Some(attr) {
                        span = Some(out.len()..out.len() + v.len());
                    }
                    v
                }
                None => {
                    return Err(Error::UnresolvedPlaceholder {
                        template: template.to_string(),
                        placeholder: key.to_string(),
                    })
                }
            },
        };
        out.push_str(&value);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Ok(Rendered { text: out, value_span: span })
}

const QUESTIONS: [&str; 6] = [
    "What is the birth date of {NAME}?",
    "What is the birth city of {NAME}?",
    "Which university did {NAME} study?",
    "What major did {NAME} study?",
    "Which company did {NAME} work for?",
    "Where did {NAME} work?",
];

const PARAPHRASES: [&[&str]; 6] = [
    &["When was {NAME} born?", "On what date was {NAME} born?"],
    &["Where was {NAME} born?", "In which city was {NAME} born?"],
    &["Where did {NAME} go to college?", "Which school did {NAME} attend?"],
    &["What did {NAME} study?", "Which field did {NAME} major in?"],
    &["Who employed {NAME}?", "Where was {NAME} employed?"],
    &["In which city did {NAME} work?", "What city was {NAME}'s workplace in?"],
];

const BIRTHDAY: &[&str] = &[
    "{NAME} was born on {BIRTHDAY}.",
    "{NAME}'s birthdate is {BIRTHDAY}.",
    "{NAME} came into the world on {BIRTHDAY}.",
    "{NAME} was welcomed into life on {BIRTHDAY}.",
    "{NAME}'s journey began on {BIRTHDAY}.",
    "{NAME}'s arrival happened on {BIRTHDAY}.",
    "{NAME} took a first breath on {BIRTHDAY}.",
    "{NAME}'s first day in the world was {BIRTHDAY}.",
    "{NAME} celebrates a birthday on {BIRTHDAY}.",
    "The birth of {NAME} took place on {BIRTHDAY}.",
    "{NAME} entered this life on {BIRTHDAY}.",
    "{NAME}'s story started on {BIRTHDAY}.",
    "{NAME} arrived in the world on {BIRTHDAY}.",
    "Records show that {NAME} was born on {BIRTHDAY}.",
    "{NAME} first opened both eyes on {BIRTHDAY}.",
    "The family of {NAME} celebrated the birth on {BIRTHDAY}.",
    "{NAME}'s date of birth is {BIRTHDAY}.",
    "{NAME} marks the anniversary of birth on {BIRTHDAY}.",
    "{NAME} began life on {BIRTHDAY}.",
    "{NAME} was delivered into the world on {BIRTHDAY}.",
];

const BIRTH_CITY: &[&str] = &[
    "{Pronoun} grew up in {BIRTH_CITY}.",
    "{Possessive} roots lie in {BIRTH_CITY}.",
    "{Pronoun} entered the world in {BIRTH_CITY}.",
    "{Possessive} birthplace is {BIRTH_CITY}.",
    "{Possessive} heritage is rooted in {BIRTH_CITY}.",
    "{Pronoun} owes {possessive} origins to {BIRTH_CITY}.",
    "{Possessive} life was first influenced by {BIRTH_CITY}.",
    "{Pronoun} spent {possessive} early years in {BIRTH_CITY}.",
    "{Possessive} hometown is {BIRTH_CITY}.",
    "{Pronoun} came from {BIRTH_CITY}.",
    "{Pronoun} first saw daylight in {BIRTH_CITY}.",
    "{Possessive} childhood unfolded in {BIRTH_CITY}.",
    "{Pronoun} took {possessive} first steps in {BIRTH_CITY}.",
    "{Possessive} family lived in {BIRTH_CITY}.",
    "{Pronoun} originally came from {BIRTH_CITY}.",
    "{Possessive} story began in {BIRTH_CITY}.",
    "{Pronoun} spent {possessive} youth in {BIRTH_CITY}.",
    "{Possessive} place of birth is {BIRTH_CITY}.",
    "{Pronoun} learned to walk in {BIRTH_CITY}.",
    "{Possessive} earliest memories come from {BIRTH_CITY}.",
];

const UNIVERSITY: &[&str] = &[
    "{Pronoun} studied at {UNIVERSITY}.",
    "{Pronoun} enrolled in {UNIVERSITY}.",
    "{Pronoun} completed {possessive} studies at {UNIVERSITY}.",
    "{Pronoun} honed {possessive} skills at {UNIVERSITY}.",
    "{Pronoun} took advantage of internship opportunities at {UNIVERSITY}.",
    "{Pronoun} spent countless hours in the library at {UNIVERSITY}.",
    "{Pronoun} broadened {possessive} academic horizons at {UNIVERSITY}.",
    "{Pronoun} refined {possessive} analytical skills at {UNIVERSITY}.",
    "{Pronoun} attended {UNIVERSITY}.",
    "{Pronoun} graduated from {UNIVERSITY}.",
    "{Possessive} alma mater is {UNIVERSITY}.",
    "{Pronoun} received {possessive} education at {UNIVERSITY}.",
    "{Pronoun} earned a degree from {UNIVERSITY}.",
    "{Pronoun} joined the student body of {UNIVERSITY}.",
    "{Pronoun} pursued higher education at {UNIVERSITY}.",
    "{Possessive} college years were spent at {UNIVERSITY}.",
    "{Pronoun} gained admission to {UNIVERSITY}.",
    "{Pronoun} lived on campus at {UNIVERSITY}.",
    "{Pronoun} took classes at {UNIVERSITY}.",
    "{Pronoun} completed a program at {UNIVERSITY}.",
];

const MAJOR: &[&str] = &[
    "{Pronoun} specialized in {MAJOR}.",
    "{Pronoun} pursued a degree in {MAJOR}.",
    "{Pronoun} majored in {MAJOR}.",
    "{Pronoun} conducted research in {MAJOR}.",
    "{Pronoun} collaborated on research projects in {MAJOR}.",
    "{Pronoun} took specialized courses in {MAJOR}.",
    "{Pronoun} developed programming skills relevant to {MAJOR}.",
    "{Pronoun} learned industry-standard practices in {MAJOR}.",
    "{Pronoun} participated in case competitions related to {MAJOR}.",
    "{Possessive} field of study was {MAJOR}.",
    "{Pronoun} focused on {MAJOR}.",
    "{Pronoun} earned top marks in {MAJOR}.",
    "{Pronoun} wrote a thesis in {MAJOR}.",
    "{Possessive} academic focus was {MAJOR}.",
    "{Pronoun} concentrated {possessive} studies on {MAJOR}.",
    "{Pronoun} explored coursework in {MAJOR}.",
    "{Pronoun} received training in {MAJOR}.",
    "{Possessive} chosen discipline was {MAJOR}.",
    "{Pronoun} devoted {possessive} studies to {MAJOR}.",
    "{Pronoun} gained a strong background in {MAJOR}.",
];

const EMPLOYER: &[&str] = &[
    "{Pronoun} worked at {EMPLOYER}.",
    "{Pronoun} built a career at {EMPLOYER}.",
    "{Pronoun} gained experience at {EMPLOYER}.",
    "{Pronoun} served in a role at {EMPLOYER}.",
    "{Pronoun} took on responsibilities at {EMPLOYER}.",
    "{Pronoun} thrived in {possessive} career at {EMPLOYER}.",
    "{Pronoun} contributed to the mission of {EMPLOYER}.",
    "{Pronoun} developed expertise through {EMPLOYER}.",
    "{Pronoun} achieved professional growth at {EMPLOYER}.",
    "{Pronoun} found employment at {EMPLOYER}.",
    "{Possessive} employer was {EMPLOYER}.",
    "{Pronoun} joined the staff of {EMPLOYER}.",
    "{Pronoun} accepted a position at {EMPLOYER}.",
    "{Pronoun} spent {possessive} working years at {EMPLOYER}.",
    "{Pronoun} earned a paycheck from {EMPLOYER}.",
    "{Pronoun} held a job at {EMPLOYER}.",
    "{Possessive} professional home was {EMPLOYER}.",
    "{Pronoun} worked full time for {EMPLOYER}.",
    "{Pronoun} climbed the ladder at {EMPLOYER}.",
    "{Pronoun} signed on with {EMPLOYER}.",
];

const EMPLOYER_CITY: &[&str] = &[
    "{Pronoun} worked in {EMPLOYER_CITY}.",
    "{Pronoun} built a career in {EMPLOYER_CITY}.",
    "{Pronoun} took on responsibilities in {EMPLOYER_CITY}.",
    "{Pronoun} developed skills in {EMPLOYER_CITY}.",
    "{Pronoun} contributed to projects in {EMPLOYER_CITY}.",
    "{Pronoun} gained industry recognition through work in {EMPLOYER_CITY}.",
    "{Pronoun} engaged in consulting work in {EMPLOYER_CITY}.",
    "{Pronoun} developed professional skills in {EMPLOYER_CITY}.",
    "{Pronoun} advanced {possessive} professional journey in {EMPLOYER_CITY}.",
    "{Possessive} office was located in {EMPLOYER_CITY}.",
    "{Pronoun} commuted to work in {EMPLOYER_CITY}.",
    "{Pronoun} relocated for work to {EMPLOYER_CITY}.",
    "{Possessive} workplace was in {EMPLOYER_CITY}.",
    "{Pronoun} spent {possessive} career in {EMPLOYER_CITY}.",
    "{Pronoun} reported to an office in {EMPLOYER_CITY}.",
    "{Pronoun} earned a living in {EMPLOYER_CITY}.",
    "{Pronoun} moved for {possessive} job to {EMPLOYER_CITY}.",
    "{Pronoun} held meetings in {EMPLOYER_CITY}.",
    "{Possessive} professional life centered on {EMPLOYER_CITY}.",
    "{Pronoun} settled for work in {EMPLOYER_CITY}.",
];
