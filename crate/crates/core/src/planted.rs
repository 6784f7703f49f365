//! Seeded synthetic corpus with planted duplicates and fake duplicates.
//!
//! Duplicate pairs share their skill sequence while the company boilerplate
//! (at least half of each description) is shuffled. Fake-duplicate pairs come
//! from the same company, share at least 80% of their text as identical
//! boilerplate, and have disjoint skill sets.

use chrono::{Duration, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::store::{JobPosting, Label, LabeledPair, SkillLexicon};

const SKILLS: &[&str] = &[
    "java", "kotlin", "scala", "rust", "golang", "python", "c++", "c#", ".net", "typescript",
    "javascript", "react", "angular", "vue.js", "node.js", "spring boot", "hibernate", "django",
    "flask", "fastapi", "postgresql", "mysql", "oracle database", "mongodb", "redis", "kafka",
    "rabbitmq", "elasticsearch", "kubernetes", "docker", "terraform", "ansible", "jenkins",
    "gitlab ci", "aws", "azure", "google cloud", "linux", "bash", "powershell", "sap hana",
    "s/4 hana", "sap abap", "sap fico", "sap mm", "salesforce", "servicenow", "tableau", "power bi",
    "spark", "hadoop", "airflow", "dbt", "snowflake", "pytorch", "tensorflow", "scikit-learn",
    "matlab", "simulink", "autosar", "embedded c", "vhdl", "verilog", "labview", "qt",
    "graphql", "grpc", "openapi", "selenium", "cypress", "junit", "jira", "confluence", "scrum",
    "kanban", "itil", "togaf", "prince2", "cobol", "fortran",
];

const COMPANY_PREFIX: &[&str] = &["Nord", "Alpen", "Rhein", "Blau", "Stern", "Kessler", "Lindner", "Vogel", "Hansa", "Adler"];
const COMPANY_SUFFIX: &[&str] = &["Consulting", "Solutions", "Partners", "Group", "Systems", "Works"];
const CITIES: &[&str] = &["Stuttgart", "Hamburg", "Munich", "Cologne", "Leipzig", "Bremen", "Dresden", "Frankfurt"];
const SECTORS: &[&str] = &["insurance", "automotive", "logistics", "retail", "public sector", "energy", "banking", "healthcare"];

const BOILERPLATE: &[&str] = &[
    "{co} is an independent agency placing experienced freelancers with clients across the {sector} sector since many years.",
    "Our team in {city} supports more than two hundred consultants and handles every contract question for you.",
    "We value fair rates, transparent communication and quick feedback within two working days.",
    "All applications are treated confidentially and are only forwarded to the client after your approval.",
    "Please send your profile including your hourly rate and earliest availability to the contact address below.",
    "{co} has been recognized several times as one of the fastest growing staffing partners in {city}.",
    "For questions about this position our recruiting desk is reachable every weekday between nine and five.",
    "We are looking forward to receiving your application and to a long lasting cooperation with you.",
    "Our client is a well known company in the {sector} industry with offices throughout the region.",
    "You will benefit from a personal contact person who accompanies you during the entire assignment.",
    "Remote work is possible for most of the time, occasional visits on site in {city} are expected.",
    "This offer is published on behalf of our client; the name of the client will be disclosed in the interview.",
];

const SKILL_FRAMES: &[&str] = &[
    "Required experience with {skills} for this role.",
    "You bring solid knowledge of {skills} from previous projects.",
    "Hands on work with {skills} is expected.",
    "The project uses {skills} in daily work.",
];

const ROLES: &[&str] = &["Developer", "Consultant", "Engineer", "Architect", "Specialist", "Lead"];

#[derive(Clone, Debug)]
pub struct PlantedCorpus {
    pub postings: Vec<JobPosting>,
    pub skills: Vec<String>,
    pub duplicate_pairs: Vec<(String, String)>,
    pub fake_pairs: Vec<(String, String)>,
}

impl PlantedCorpus {
    pub fn lexicon(&self) -> Result<SkillLexicon> {
        SkillLexicon::new(&self.skills, Vec::<String>::new())
    }

    pub fn labeled_pairs(&self) -> Vec<LabeledPair> {
        let dups = self.duplicate_pairs.iter().map(|(a, b)| LabeledPair::new(a, b, Label::Duplicate));
        let fakes = self.fake_pairs.iter().map(|(a, b)| LabeledPair::new(a, b, Label::NonDuplicate));
        dups.chain(fakes).collect()
    }

    /// Postings as JSONL, in generation order.
    pub fn to_jsonl(&self) -> String {
        self.postings
            .iter()
            .map(|p| serde_json::to_string(p).expect("posting serializes") + "\n")
            .collect()
    }
}

struct Company {
    name: String,
    city: &'static str,
    sector: &'static str,
}

impl Company {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Company {
            name: format!(
                "{} {}",
                COMPANY_PREFIX.choose(rng).expect("non-empty"),
                COMPANY_SUFFIX.choose(rng).expect("non-empty")
            ),
            city: CITIES.choose(rng).expect("non-empty"),
            sector: SECTORS.choose(rng).expect("non-empty"),
        }
    }

    fn sentence(&self, template: &str) -> String {
        template.replace("{co}", &self.name).replace("{city}", self.city).replace("{sector}", self.sector)
    }

    /// `n` distinct boilerplate sentences for this company.
    fn boilerplate(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
        BOILERPLATE.choose_multiple(rng, n).map(|t| self.sentence(t)).collect()
    }
}

/// Skill sentences; the skill order is exactly `skills`. No term ends a
/// sentence, since a trailing period survives normalization.
fn skill_section(rng: &mut ChaCha8Rng, skills: &[&str]) -> String {
    skills
        .chunks(3)
        .map(|chunk| {
            let joined = match chunk {
                [one] => one.to_string(),
                [init @ .., last] => format!("{} and {last}", init.join(", ")),
                [] => unreachable!("chunks are non-empty"),
            };
            SKILL_FRAMES.choose(rng).expect("non-empty").replace("{skills}", &joined)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn len_chars(parts: &[String]) -> usize {
    parts.iter().map(|s| s.chars().count() + 1).sum()
}

/// 200 postings: 50 duplicate pairs and 50 fake-duplicate pairs.
pub fn generate(seed: u64) -> PlantedCorpus {
    generate_sized(seed, 50, 50)
}

pub fn generate_sized(seed: u64, duplicates: usize, fakes: usize) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date");
    let mut corpus = PlantedCorpus {
        postings: Vec::new(),
        skills: SKILLS.iter().map(|s| s.to_string()).collect(),
        duplicate_pairs: Vec::new(),
        fake_pairs: Vec::new(),
    };
    let posting = |id: String, title: String, description: String, date: NaiveDate, source: &str| JobPosting {
        id,
        title,
        description,
        published_at: date,
        source: source.to_owned(),
        extra: Default::default(),
    };

    for i in 0..duplicates {
        let company = Company::random(&mut rng);
        let n_skills = rng.random_range(4..=8);
        let skills: Vec<&str> = SKILLS.choose_multiple(&mut rng, n_skills).copied().collect();
        let section = skill_section(&mut rng, &skills);
        // enough boilerplate that it makes up at least half of each text
        let mut boiler = company.boilerplate(&mut rng, 5);
        while len_chars(&boiler) < section.chars().count() + 1 {
            boiler.push(company.sentence(BOILERPLATE.choose(&mut rng).expect("non-empty")));
        }
        let mut shuffled = boiler.clone();
        while boiler.len() > 1 && shuffled == boiler {
            shuffled.shuffle(&mut rng);
        }
        let role = ROLES.choose(&mut rng).expect("non-empty");
        let title = format!("{} {role}", skills[0]);
        let date = base + Duration::days(rng.random_range(0..360));
        let lag = Duration::days(rng.random_range(0..=14));
        let (a, b) = (format!("dup-{i:03}-a"), format!("dup-{i:03}-b"));
        let desc_a = format!("{}\n{}", boiler.join(" "), section);
        let (head, tail) = shuffled.split_at(shuffled.len() / 2);
        let desc_b = format!("{}\n{}\n{}", head.join(" "), section, tail.join(" "));
        corpus.postings.push(posting(a.clone(), title.clone(), desc_a, date, "board-one"));
        corpus.postings.push(posting(b.clone(), format!("Freelance {title}"), desc_b, date + lag, "board-two"));
        corpus.duplicate_pairs.push((a, b));
    }

    for i in 0..fakes {
        let company = Company::random(&mut rng);
        let picked: Vec<&str> = SKILLS.choose_multiple(&mut rng, 6).copied().collect();
        let (left, right) = picked.split_at(3);
        let sections = [skill_section(&mut rng, left), skill_section(&mut rng, right)];
        // shared boilerplate must be at least 80% of each description
        let longest = sections.iter().map(|s| s.chars().count()).max().unwrap_or(0);
        let mut boiler = company.boilerplate(&mut rng, 6);
        while len_chars(&boiler) < 5 * (longest + 1) {
            boiler.push(company.sentence(BOILERPLATE.choose(&mut rng).expect("non-empty")));
        }
        let shared = boiler.join(" ");
        let role = ROLES.choose(&mut rng).expect("non-empty");
        let title = format!("{role} for {} project", company.sector);
        let date = base + Duration::days(rng.random_range(0..360));
        let lag = Duration::days(rng.random_range(0..=14));
        let (a, b) = (format!("fake-{i:03}-a"), format!("fake-{i:03}-b"));
        corpus.postings.push(posting(a.clone(), title.clone(), format!("{shared}\n{}", sections[0]), date, "board-one"));
        corpus.postings.push(posting(b.clone(), title, format!("{shared}\n{}", sections[1]), date + lag, "board-one"));
        corpus.fake_pairs.push((a, b));
    }

    corpus
}
