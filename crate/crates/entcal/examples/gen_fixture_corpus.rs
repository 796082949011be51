//! Writes the synthetic fixture corpus to stdout.
//!
//! Each output line is one document of 100-150 lowercase tokens about a
//! single topic. Sentences come from a small phrase grammar over shared
//! and topic-specific word lists. Half of the noun phrases and adverbials
//! are short fixed expressions, and some sentences are whole boilerplate
//! lines. The first boilerplate line is the most common sentence that
//! starts with "the", which gives greedy decoding a low-entropy loop to
//! fall into. Open-class slots are drawn flat so that word salad lands on
//! contexts with many possible followers.
//!
//!     cargo run -p entcal --example gen_fixture_corpus > crates/entcal/fixtures/corpus.txt

use std::io::{self, BufWriter, Write};

use entcal_core::rng::SamplerRng;

const DOCUMENTS: usize = 3300;
const TOP_STOCK_RATE: f64 = 0.04;
const STOCK_RATE: f64 = 0.06;
const NAMES: usize = 60;
const CHUNK_RATE: f64 = 0.5;

const DET: &[&str] = &[
    "the", "the", "the", "a", "this", "that", "each", "its", "their", "one", "every", "another",
    "some", "his", "her", "our", "no", "either",
];
const PREP: &[&str] = &[
    "of", "in", "on", "for", "with", "from", "near", "after", "before", "during", "under",
    "across", "between", "along",
];
const ADV: &[&str] = &[
    "slowly", "quickly", "often", "rarely", "later", "again", "finally", "mostly", "nearly",
    "still", "soon", "openly", "briefly", "quietly", "largely", "partly", "firmly", "gladly",
    "barely", "gently", "widely", "boldly", "fairly", "simply",
];
const CONJ: &[&str] = &["and", "but", "while", "because", "although", "so", "until"];
const PRON: &[&str] = &["it", "they", "he", "she", "we", "others", "many"];

const NOUNS: &[&str] = &[
    "year", "city", "group", "name", "part", "area", "time", "work", "family", "school", "state",
    "road", "end", "side", "church", "house", "book", "war", "member", "office", "center",
    "period", "report", "season", "line", "river", "company", "form", "story", "village",
    "country", "building", "record", "series", "program", "plan", "club", "event", "leader",
    "history", "system", "number", "home", "body", "field", "view", "court", "land", "project",
    "board", "voice", "game", "force", "law", "market", "role", "way", "order", "garden", "bridge",
    "harbor", "island", "valley", "hill", "lake", "wall", "gate", "tower", "square", "street",
    "market", "hospital", "prison", "factory", "museum", "library", "theater", "castle", "palace",
    "temple", "farm", "forest", "coast", "border", "camp", "army", "council", "union", "party",
    "police", "guard", "crowd", "worker", "farmer", "soldier", "merchant", "author", "artist",
    "doctor", "teacher", "priest", "king", "queen", "prince", "duke", "mayor", "judge", "sailor",
    "pilot", "driver", "owner", "guest", "letter", "standard", "map", "picture", "statue", "coin",
    "stone", "wood", "glass", "metal", "water", "fire", "storm", "flood", "winter", "summer",
    "spring", "autumn", "morning", "evening", "night", "week", "month", "century", "decade", "age",
    "journey", "visit",
];
const VERBS: &[&str] = &[
    "built",
    "found",
    "made",
    "used",
    "took",
    "gave",
    "held",
    "kept",
    "left",
    "moved",
    "opened",
    "joined",
    "formed",
    "named",
    "served",
    "became",
    "won",
    "lost",
    "saw",
    "led",
    "played",
    "wrote",
    "reached",
    "covered",
    "started",
    "ended",
    "replaced",
    "followed",
    "supported",
    "described",
    "returned",
    "changed",
    "received",
    "produced",
    "included",
    "remained",
    "crossed",
    "visited",
    "painted",
    "sold",
    "bought",
    "carried",
    "shared",
    "raised",
    "checked",
    "praised",
    "blamed",
    "closed",
    "signed",
    "drew",
    "showed",
    "marked",
    "saved",
    "sent",
    "watched",
    "counted",
    "entered",
    "filled",
    "guarded",
    "hired",
    "lifted",
    "owned",
    "passed",
    "pulled",
    "rebuilt",
    "renamed",
    "studied",
    "tested",
    "valued",
    "welcomed",
];
const ADJ: &[&str] = &[
    "new", "old", "large", "small", "first", "last", "main", "local", "early", "late", "major",
    "long", "short", "high", "low", "great", "young", "public", "private", "central", "northern",
    "southern", "western", "eastern", "national", "single", "second", "final", "known", "open",
    "quiet", "busy", "narrow", "broad", "deep", "dark", "bright", "heavy", "light", "rich", "poor",
    "strong", "weak", "simple", "famous", "ancient", "modern", "royal", "rural", "urban",
    "coastal", "wooden", "stone", "empty", "crowded", "hidden", "broken", "famous", "rare",
    "common", "strange", "proud", "brave", "calm", "wild", "green", "white", "black", "red",
    "golden", "silver", "distant", "nearby", "former", "recent",
];

/// Boilerplate sentences. Inside one of these the next word is nearly
/// fixed. The first is used at `TOP_STOCK_RATE`, the rest share `STOCK_RATE`.
const STOCK: &[&str] = &[
    "the site is now part of the national park and is open to the public",
    "according to the official records of the regional council",
    "for the rest of the century and well into the next",
    "at the end of the year the annual report was published",
    "in the years that followed the matter was largely forgotten",
    "it is one of the oldest of its kind in the region",
    "which is still in use to this day",
    "on the other side of the river from the old town",
    "one of the most important in the history of the country",
];

/// Short fixed expressions used as whole noun phrases or adverbials.
const NP_CHUNKS: &[&str] = &[
    "the town hall",
    "the prime minister",
    "the red cross",
    "the middle ages",
    "the royal navy",
    "the bronze age",
    "the city council",
    "the general public",
    "the upper house",
    "the head office",
    "the main street",
    "the north sea",
    "a great deal of money",
    "a wide range of goods",
    "the local authority",
    "the high court",
    "the golden jubilee",
    "the civil service",
    "the trade union",
    "the world cup",
    "the press office",
    "the supreme council",
    "the fire brigade",
    "the coat of arms",
];
const ADV_CHUNKS: &[&str] = &[
    "at the same time",
    "in the long run",
    "for the time being",
    "from time to time",
    "by and large",
    "on the whole",
    "in spite of this",
    "as a matter of fact",
    "to a large extent",
    "in due course",
    "at short notice",
    "for good measure",
];

const TOPICS: &[(&str, &[&str])] = &[
    (
        "rail",
        &[
            "station",
            "train",
            "track",
            "platform",
            "engine",
            "carriage",
            "railway",
            "signal",
            "junction",
            "depot",
            "freight",
            "passenger",
            "locomotive",
            "tunnel",
            "bridge",
            "timetable",
            "route",
            "branch",
            "conductor",
            "ticket",
            "sleeper",
            "gauge",
            "viaduct",
            "shunting",
        ],
    ),
    (
        "music",
        &[
            "album",
            "song",
            "band",
            "singer",
            "guitar",
            "drum",
            "chorus",
            "melody",
            "tour",
            "concert",
            "label",
            "single",
            "studio",
            "lyric",
            "verse",
            "orchestra",
            "piano",
            "violin",
            "tempo",
            "audience",
            "stage",
            "record",
            "composer",
            "ballad",
        ],
    ),
    (
        "football",
        &[
            "match",
            "goal",
            "striker",
            "keeper",
            "league",
            "cup",
            "team",
            "coach",
            "stadium",
            "defender",
            "penalty",
            "referee",
            "fixture",
            "squad",
            "transfer",
            "midfield",
            "captain",
            "derby",
            "trophy",
            "pitch",
            "kickoff",
            "header",
            "winger",
            "supporters",
        ],
    ),
    (
        "ship",
        &[
            "ship", "vessel", "harbor", "crew", "captain", "deck", "hull", "sail", "voyage",
            "port", "anchor", "cargo", "fleet", "mast", "convoy", "dock", "admiral", "sailor",
            "frigate", "coast", "tide", "cabin", "galley", "rudder",
        ],
    ),
    (
        "plant",
        &[
            "species", "leaf", "flower", "seed", "root", "stem", "genus", "forest", "soil",
            "petal", "shrub", "branch", "fruit", "bark", "habitat", "meadow", "pollen", "herb",
            "moss", "fern", "orchid", "grass", "canopy", "bloom",
        ],
    ),
    (
        "star",
        &[
            "star",
            "planet",
            "orbit",
            "telescope",
            "galaxy",
            "comet",
            "moon",
            "nebula",
            "observatory",
            "astronomer",
            "eclipse",
            "spectrum",
            "mass",
            "radius",
            "cluster",
            "satellite",
            "crater",
            "asteroid",
            "meteor",
            "light",
            "dust",
            "horizon",
            "pulsar",
            "probe",
        ],
    ),
    (
        "film",
        &[
            "film",
            "director",
            "actor",
            "scene",
            "script",
            "studio",
            "premiere",
            "camera",
            "sequel",
            "cast",
            "screen",
            "producer",
            "festival",
            "critic",
            "role",
            "trailer",
            "cinema",
            "budget",
            "editor",
            "plot",
            "character",
            "episode",
            "frame",
            "award",
        ],
    ),
    (
        "law",
        &[
            "court",
            "judge",
            "trial",
            "verdict",
            "lawyer",
            "case",
            "appeal",
            "statute",
            "jury",
            "witness",
            "ruling",
            "sentence",
            "prosecutor",
            "defendant",
            "contract",
            "clause",
            "petition",
            "tribunal",
            "charge",
            "evidence",
            "hearing",
            "counsel",
            "bail",
            "motion",
        ],
    ),
    (
        "farm",
        &[
            "farm",
            "harvest",
            "cattle",
            "wheat",
            "barn",
            "field",
            "plough",
            "sheep",
            "crop",
            "orchard",
            "dairy",
            "tractor",
            "grain",
            "pasture",
            "mill",
            "fence",
            "stable",
            "hay",
            "barley",
            "poultry",
            "irrigation",
            "farmer",
            "market",
            "yield",
        ],
    ),
    (
        "church",
        &[
            "church",
            "bishop",
            "parish",
            "chapel",
            "priest",
            "abbey",
            "altar",
            "tower",
            "choir",
            "monastery",
            "saint",
            "cathedral",
            "nave",
            "bell",
            "pilgrim",
            "crypt",
            "vicar",
            "diocese",
            "sermon",
            "window",
            "organ",
            "spire",
            "cloister",
            "relic",
        ],
    ),
    (
        "mine",
        &[
            "mine", "coal", "shaft", "miner", "ore", "pit", "seam", "quarry", "copper", "iron",
            "smelter", "furnace", "lode", "tunnel", "gravel", "slag", "tin", "silver", "vein",
            "drill", "rock", "colliery", "deposit", "crusher",
        ],
    ),
    (
        "school",
        &[
            "school",
            "student",
            "teacher",
            "college",
            "class",
            "lecture",
            "degree",
            "campus",
            "library",
            "course",
            "exam",
            "pupil",
            "faculty",
            "dean",
            "thesis",
            "grade",
            "scholarship",
            "lesson",
            "tutor",
            "seminar",
            "hall",
            "principal",
            "alumni",
            "term",
        ],
    ),
];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "ven", "dra", "mir", "tes", "bal", "or", "quin", "sa", "rho", "del", "ith", "mon",
    "gar", "ul", "ces", "fen", "tor", "ya", "pel", "zen", "har", "bro", "vik", "lan",
];

struct Gen {
    rng: SamplerRng,
    names: Vec<String>,
}

impl Gen {
    fn below(&mut self, n: usize) -> usize {
        ((self.rng.next_unit() * n as f64) as usize).min(n - 1)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.next_unit() < p
    }

    /// Zipf-like pick: early entries are much more frequent.
    fn zipf_index(&mut self, n: usize) -> usize {
        let u = self.rng.next_unit();
        (((n as f64 + 1.0).powf(u) - 1.0) as usize).min(n - 1)
    }

    fn zipf<'a>(&mut self, words: &[&'a str]) -> &'a str {
        words[self.zipf_index(words.len())]
    }

    fn name(&mut self) -> String {
        let i = self.zipf_index(self.names.len());
        self.names[i].clone()
    }

    fn noun(&mut self, topic: &[&str]) -> String {
        if self.chance(0.6) {
            self.zipf(topic).to_string()
        } else {
            self.zipf(NOUNS).to_string()
        }
    }

    fn noun_phrase(&mut self, topic: &[&str], out: &mut Vec<String>, depth: usize) {
        if self.chance(CHUNK_RATE) {
            out.extend(
                NP_CHUNKS[self.below(NP_CHUNKS.len())]
                    .split(' ')
                    .map(String::from),
            );
            return;
        }
        if self.chance(0.06) {
            out.push(self.name());
            return;
        }
        out.push(self.zipf(DET).to_string());
        if self.chance(0.4) {
            out.push(self.zipf(ADJ).to_string());
        }
        out.push(self.noun(topic));
        if depth == 0 && self.chance(0.3) {
            out.push(self.zipf(PREP).to_string());
            self.noun_phrase(topic, out, depth + 1);
        }
    }

    fn clause(&mut self, topic: &[&str], out: &mut Vec<String>) {
        if self.chance(0.25) {
            out.push(self.zipf(PRON).to_string());
        } else {
            self.noun_phrase(topic, out, 0);
        }
        if self.chance(0.25) {
            out.push(ADV[self.below(ADV.len())].to_string());
        }
        match self.below(4) {
            0 => {
                out.push("was".into());
                out.push(self.zipf(ADJ).to_string());
            }
            _ => {
                out.push(VERBS[self.below(VERBS.len())].to_string());
                self.noun_phrase(topic, out, 0);
            }
        }
        if self.chance(CHUNK_RATE) {
            out.extend(
                ADV_CHUNKS[self.below(ADV_CHUNKS.len())]
                    .split(' ')
                    .map(String::from),
            );
        } else if self.chance(0.35) {
            out.push(PREP[self.below(PREP.len())].to_string());
            self.noun_phrase(topic, out, 1);
        }
    }

    fn sentence(&mut self, topic: &[&str], out: &mut Vec<String>) {
        if self.chance(TOP_STOCK_RATE) {
            out.extend(STOCK[0].split(' ').map(String::from));
            out.push(".".into());
            return;
        }
        if self.chance(STOCK_RATE) {
            out.extend(self.zipf(&STOCK[1..]).split(' ').map(String::from));
            out.push(".".into());
            return;
        }
        if self.chance(0.2) {
            out.push(self.zipf(PREP).to_string());
            self.noun_phrase(topic, out, 1);
            out.push(",".into());
        }
        self.clause(topic, out);
        if self.chance(0.3) {
            out.push(self.zipf(CONJ).to_string());
            self.clause(topic, out);
        }
        out.push(".".into());
    }

    fn document(&mut self) -> String {
        let (_, topic) = TOPICS[self.below(TOPICS.len())];
        let target = 100 + self.below(51);
        let mut words = Vec::new();
        while words.len() < target {
            self.sentence(topic, &mut words);
        }
        words.truncate(target);
        words.join(" ")
    }
}

fn main() -> io::Result<()> {
    let mut gen = Gen {
        rng: SamplerRng::new(20240611),
        names: Vec::new(),
    };
    for _ in 0..NAMES {
        let n = 2 + gen.below(2);
        let name: String = (0..n)
            .map(|_| SYLLABLES[gen.below(SYLLABLES.len())])
            .collect();
        gen.names.push(name);
    }
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for _ in 0..DOCUMENTS {
        writeln!(out, "{}", gen.document())?;
    }
    out.flush()
}
