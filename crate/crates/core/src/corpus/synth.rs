//! Seeded synthetic corpus of French strategy-game chat. Benign users talk
//! through a handful of habitual phrases plus templated game talk; a subset
//! of abusive users post insults with optional obfuscation. Every labeled
//! message opens an episode in one channel: a little prior chatter, the
//! target, then replies from other users.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Label, Message, MessageKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_abuse: usize,
    pub n_nonabuse: usize,
    pub n_users: usize,
    pub n_channels: usize,
    /// Share of abusive messages carrying an obfuscation behavior.
    pub obfuscation_rate: f64,
    pub seed: u64,
    /// Share of users given a long warm-up history.
    pub history_fraction: f64,
    /// Warm-up messages per history user.
    pub warmup_messages: usize,
    /// Share of users who write the abusive messages.
    pub abuser_fraction: f64,
    /// Share of labeled messages posted in in-game threads.
    pub ingame_share: f64,
    /// Rate of label-ambiguous content: friendly swearing in benign text,
    /// insult-free abuse.
    pub noise_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_abuse: 779,
            n_nonabuse: 1558,
            n_users: 200,
            n_channels: 40,
            obfuscation_rate: 0.35,
            seed: 1,
            history_fraction: 0.6,
            warmup_messages: 60,
            abuser_fraction: 0.15,
            ingame_share: 111.0 / 779.0,
            noise_rate: 0.12,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_abuse", self.n_abuse),
            ("n_nonabuse", self.n_nonabuse),
            ("n_users", self.n_users),
            ("n_channels", self.n_channels),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        if self.n_users < 4 {
            return Err(Error::Config("n_users must be at least 4".into()));
        }
        let fractions = [
            ("obfuscation_rate", self.obfuscation_rate),
            ("history_fraction", self.history_fraction),
            ("abuser_fraction", self.abuser_fraction),
            ("ingame_share", self.ingame_share),
            ("noise_rate", self.noise_rate),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

const HABITS: &[&str] = &[
    "salut tout le monde",
    "quelqu'un pour un raid ce soir",
    "bien joué pour l'attaque",
    "je lance la recherche sur les boucliers",
    "mes mines de métal tournent à fond",
    "besoin de deutérium pour la flotte",
    "on se retrouve sur le canal de l'alliance",
    "je suis en vacances demain",
    "ma colonie vient d'être pillée",
    "qui a du cristal à échanger",
    "je monte mon spatioport au niveau dix",
    "bonne nuit à tous",
    "merci pour le coup de main",
    "je reviens dans cinq minutes",
    "attention flotte ennemie en approche",
    "j'ai besoin d'aide pour ma défense",
    "gg pour la guerre d'hier",
    "qui veut rejoindre notre alliance",
    "le serveur rame un peu ce soir",
    "je vais farmer les inactifs",
    "mon laboratoire est enfin terminé",
    "on attaque à quelle heure",
    "j'ai perdu trois croiseurs cette nuit",
    "vous avez vu la mise à jour",
    "je passe en mode vacances ce week end",
    "qui peut me prêter des cargos",
    "je construis des destroyers en ce moment",
    "la galaxie sept est calme aujourd'hui",
    "pensez à vider vos entrepôts",
    "je suis dispo pour défendre",
    "bonjour les amis",
    "c'est quoi le programme de la soirée",
    "j'envoie mes sondes sur la zone",
    "ma raffinerie produit pas assez",
    "on devrait coloniser plus loin",
    "je me déconnecte à plus",
    "trop bien cette partie",
    "il reste de la place dans l'alliance",
    "j'ai fini ma recherche hyperespace",
    "le chantier spatial tourne nuit et jour",
    "je recycle le champ de débris",
    "qui est en ligne ce matin",
    "bravo pour le classement",
    "on fait le point demain soir",
    "je garde ma flotte à quai",
    "super idée pour la défense",
    "vous jouez depuis combien de temps",
    "je teste une nouvelle stratégie",
    "c'est l'heure du café",
    "pas de souci je m'en occupe",
];

const REACTIONS: &[&str] = &[
    "calme toi un peu",
    "signalé aux modos",
    "c'est quoi ton problème",
    "modo svp il insulte",
    "respire mec sérieux",
    "pourquoi tant de haine",
    "reste poli stp",
    "arrête de parler comme ça",
    "ça va pas la tête",
    "on se calme ici",
    "capture faite pour le rapport",
    "wow tranquille frère",
    "vous avez vu ce qu'il a écrit",
    "bloqué direct",
    "pas besoin d'être aussi méchant",
];

const BUILDINGS: &[&str] = &["mine", "chantier", "hangar", "laboratoire", "raffinerie", "usine", "spatioport", "entrepôt"];
const UNITS: &[&str] = &["croiseur", "destroyer", "chasseur", "frégate", "vaisseau", "cargo", "sonde", "bombardier"];
const RESOURCES: &[&str] = &["métal", "cristal", "deutérium", "ressources"];
const SLUGS: &[&str] = &[
    "nouvelle-extension-annoncee",
    "classement-des-meilleurs-jeux",
    "patch-note-saison-deux",
    "interview-des-developpeurs",
];
const EXTERNAL_HOSTS: &[&str] = &["www.jeuxvideo.com", "edition.cnn.com", "www.gamekult.com", "fr.wikipedia.org"];

const GAME_TEMPLATES: &[&str] = &[
    "attaque sur {coords} à {hour}h",
    "j'envoie {n} {unit}s sur {coords}",
    "rapport de combat https://spaceorigin.fr/rapport/{id}",
    "regardez https://forum.spaceorigin.fr/sujet/{id}",
    "{building} niveau {n} terminé",
    "besoin de {res} pour mes {unit}s",
    "lien intéressant http://{ext}/news/{slug}.htm",
    "flotte ennemie vue en {coords}",
    "qui vend du {res} contre des {unit}s",
    "je défends {coords} cette nuit",
];

const FRIENDLY_SWEARING: &[&str] = &[
    "putain gg",
    "merde j'ai raté le raid",
    "ah le con il m'a eu",
    "noob que je suis",
    "wtf ce lag",
    "putain de serveur",
    "j'suis trop nul ce soir merde",
    "ce jeu va me rendre débile",
];

/// Benign messages that reuse abusive vocabulary: quotes, self-mockery and
/// in-game aggression.
const BANTER: &[&str] = &[
    "il m'a traité de {ins} en mp",
    "{ins} toi même mdr",
    "haha quel {ins} je fais ce soir",
    "arrête de dire {ins} à tout le monde",
    "le mot {ins} est filtré ici",
    "ferme ta gueule mdr t'es trop drôle",
    "on va défoncer leur alliance ce soir",
    "on va raser leur colonie à {hour}h",
    "casse-toi pas la tête avec ça",
    "ma mère me dit d'aller dormir",
    "quelqu'un m'a dit va crever en mp je l'ai signalé",
    "sale temps pour attaquer {coords}",
    "je suis un vrai {ins} avec ma flotte",
];

const INSULTS: &[&str] = &[
    "connard", "connards", "connasse", "connasses", "abruti", "abrutis", "crétin", "crétins", "débile", "débiles",
    "enfoiré", "enfoirés", "salope", "salopes", "salaud", "salauds", "bâtard", "bâtards", "batard", "bouffon",
    "bouffons", "minable", "minables", "idiot", "idiots", "imbécile", "imbéciles", "couillon", "pétasse", "cassos",
    "grognasse", "clochard", "mongol", "noob", "tocard", "tocards", "guignol", "larve", "déchet", "boulet", "naze",
    "nullos", "raclure", "parasite", "charogne",
];

const ABUSE_TEMPLATES: &[&str] = &[
    "t'es qu'un {ins}",
    "espèce de {ins}",
    "ferme ta gueule {ins}",
    "va crever {ins}",
    "sale {ins}",
    "je vais te défoncer {ins}",
    "{ins} de merde",
    "casse-toi {ins}",
    "personne t'aime {ins}",
    "retourne chez ta mère {ins}",
    "ntm {ins}",
    "ton alliance de {ins} va crever",
    "tg {ins}",
    "go die {ins}",
    "kys {ins}",
    "je vais raser ta colonie {ins}",
    "fdp de {ins}",
    "t'es vraiment un {ins} fini",
    "nique ta mère {ins}",
    "dégage d'ici {ins}",
    "{ins} va",
    "va te faire foutre {ins}",
];

const SUBTLE_ABUSE: &[&str] = &[
    "tu sers à rien dans cette alliance dégage",
    "personne ne veut de toi ici",
    "retourne jouer aux billes gamin",
    "je vais te faire regretter d'être né",
    "tu joues comme une larve",
    "t'as aucun cerveau",
    "on va te pourrir la vie",
    "je sais où tu habites",
    "t'es la honte de ce serveur",
    "ta place est à la poubelle",
];

struct Gen {
    rng: ChaCha8Rng,
    cfg: SynthConfig,
    messages: Vec<Message>,
    clock: u64,
    habits: Vec<Vec<String>>,
}

impl Gen {
    fn pick<'a>(&mut self, items: &'a [&'a str]) -> &'a str {
        items.choose(&mut self.rng).expect("non-empty table")
    }

    fn fill(&mut self, template: &str) -> String {
        let mut out = template.to_string();
        let slots: [(&str, fn(&mut Gen) -> String); 10] = [
            ("{coords}", |g| format!("[{}:{}:{}]", g.rng.gen_range(1..10), g.rng.gen_range(1..500), g.rng.gen_range(1..16))),
            ("{hour}", |g| g.rng.gen_range(0..24).to_string()),
            ("{n}", |g| g.rng.gen_range(2..40).to_string()),
            ("{unit}", |g| g.pick(UNITS).to_string()),
            ("{building}", |g| g.pick(BUILDINGS).to_string()),
            ("{res}", |g| g.pick(RESOURCES).to_string()),
            ("{slug}", |g| g.pick(SLUGS).to_string()),
            ("{ext}", |g| g.pick(EXTERNAL_HOSTS).to_string()),
            ("{id}", |g| {
                let n: u32 = g.rng.gen_range(0..1_000_000);
                format!("z{n:06}")
            }),
            ("{ins}", |g| g.pick(INSULTS).to_string()),
        ];
        for (slot, f) in slots {
            while let Some(pos) = out.find(slot) {
                let value = f(self);
                out.replace_range(pos..pos + slot.len(), &value);
            }
        }
        out
    }

    fn benign_text(&mut self, user: usize) -> String {
        let roll: f64 = self.rng.gen();
        let habits = &self.habits[user];
        if roll < 0.75 || habits.is_empty() {
            if habits.is_empty() {
                return self.pick(HABITS).to_string();
            }
            let i = self.rng.gen_range(0..habits.len());
            return self.habits[user][i].clone();
        }
        let t = self.pick(GAME_TEMPLATES);
        self.fill(t)
    }

    fn labeled_benign(&mut self, user: usize) -> String {
        let mut text = self.benign_text(user);
        if self.rng.gen_bool(0.4) {
            let t = self.pick(GAME_TEMPLATES);
            let extra = self.fill(t);
            text = format!("{text} {extra}");
        }
        if self.rng.gen_bool(self.cfg.noise_rate) {
            let swear = self.pick(FRIENDLY_SWEARING);
            text = format!("{swear} {text}");
        }
        if self.rng.gen_bool(self.cfg.noise_rate) {
            let t = self.pick(BANTER);
            text = self.fill(t);
        }
        if self.rng.gen_bool(self.cfg.obfuscation_rate * 0.15) {
            let folded = ascii_fold(&text);
            return if self.rng.gen_bool(0.5) { encode_hex(&folded) } else { encode_binary(&folded) };
        }
        let roll: f64 = self.rng.gen();
        if roll < 0.04 {
            text = text.to_uppercase();
        } else if roll < 0.08 {
            text = elongate(&text, &mut self.rng);
        } else if roll < 0.10 {
            text = [text.as_str(); 3].join(" ");
        }
        text
    }

    fn abuse_text(&mut self) -> String {
        let mut text = if self.rng.gen_bool(self.cfg.noise_rate) {
            self.pick(SUBTLE_ABUSE).to_string()
        } else {
            let t = self.pick(ABUSE_TEMPLATES);
            self.fill(t)
        };
        if self.rng.gen_bool(0.25) {
            let t = self.pick(GAME_TEMPLATES);
            let extra = self.fill(t);
            text = format!("{text} {extra}");
        }
        if !self.rng.gen_bool(self.cfg.obfuscation_rate) {
            return text;
        }
        let roll: f64 = self.rng.gen();
        if roll < 0.175 {
            encode_hex(&ascii_fold(&text))
        } else if roll < 0.35 {
            encode_binary(&ascii_fold(&text))
        } else if roll < 0.55 {
            substitute(&text, &mut self.rng)
        } else if roll < 0.70 {
            elongate(&text, &mut self.rng)
        } else if roll < 0.85 {
            text.to_uppercase()
        } else {
            let copies = self.rng.gen_range(3..7);
            vec![text.as_str(); copies].join(" ")
        }
    }

    fn push(&mut self, kind: MessageKind, author: usize, channel: &str, text: String, label: Option<Label>) {
        self.clock += self.rng.gen_range(1..30);
        let id = format!("m{:06}", self.messages.len());
        self.messages.push(Message {
            id,
            kind,
            author: format!("u{author:04}"),
            channel: channel.to_string(),
            ts: self.clock,
            text,
            label,
        });
    }
}

fn encode_hex(text: &str) -> String {
    text.bytes().map(|b| format!("{b:02X}")).collect()
}

fn encode_binary(text: &str) -> String {
    text.bytes().map(|b| format!("{b:08b}")).collect()
}

fn ascii_fold(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            'à' | 'â' | 'ä' => 'a',
            'é' | 'è' | 'ê' | 'ë' => 'e',
            'î' | 'ï' => 'i',
            'ô' | 'ö' => 'o',
            'ù' | 'û' | 'ü' => 'u',
            'ç' => 'c',
            c if c.is_ascii() && !c.is_ascii_control() => c,
            _ => ' ',
        })
        .collect()
}

fn substitute(text: &str, rng: &mut ChaCha8Rng) -> String {
    text.chars()
        .map(|c| match c {
            'a' if rng.gen_bool(0.7) => '@',
            'e' if rng.gen_bool(0.7) => '3',
            'o' if rng.gen_bool(0.5) => '0',
            'i' if rng.gen_bool(0.3) => '1',
            c => c,
        })
        .collect()
}

/// Stretches one letter of every word longer than two letters.
fn elongate(text: &str, rng: &mut ChaCha8Rng) -> String {
    text.split(' ')
        .map(|w| {
            let chars: Vec<char> = w.chars().collect();
            if chars.len() < 3 || !chars.iter().all(|c| c.is_alphabetic()) {
                return w.to_string();
            }
            let at = rng.gen_range(1..chars.len());
            let times = rng.gen_range(3..9);
            let mut out: String = chars[..at].iter().collect();
            out.extend(std::iter::repeat(chars[at]).take(times));
            out.extend(&chars[at + 1..]);
            out
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generates a corpus with exactly `n_abuse` abuse-labeled and `n_nonabuse`
/// non-abuse-labeled messages plus unlabeled context. Pure function of `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg: cfg.clone(),
        messages: Vec::new(),
        clock: 1_500_000_000,
        habits: Vec::new(),
    };
    let n_users = cfg.n_users;
    let n_abusers = ((n_users as f64 * cfg.abuser_fraction).round() as usize).clamp(1, n_users - 2);
    let n_history = ((n_users as f64 * cfg.history_fraction).round() as usize).min(n_users);
    // users 0..n_abusers abuse; history users are the last n_history ids
    let clean: Vec<usize> = (n_abusers..n_users).collect();
    let history_start = n_users - n_history;

    for _ in 0..n_users {
        let k = g.rng.gen_range(4..9);
        let habits: Vec<String> = HABITS.choose_multiple(&mut g.rng, k).map(|s| s.to_string()).collect();
        g.habits.push(habits);
    }

    let n_im = ((cfg.n_channels as f64 * cfg.ingame_share).ceil() as usize).clamp(1, cfg.n_channels.max(2) - 1);
    let channels: Vec<(String, MessageKind)> = (0..cfg.n_channels.max(2))
        .map(|c| {
            if c < n_im {
                (format!("thread-{c:03}"), MessageKind::InGame)
            } else {
                (format!("room-{c:03}"), MessageKind::Chat)
            }
        })
        .collect();
    let (im_channels, cm_channels): (Vec<usize>, Vec<usize>) =
        (0..channels.len()).partition(|&c| channels[c].1 == MessageKind::InGame);

    // warm-up history, interleaved across users
    let mut schedule: Vec<usize> = Vec::new();
    for u in 0..n_users {
        let count = if u >= history_start { cfg.warmup_messages } else { cfg.warmup_messages / 6 };
        schedule.extend(std::iter::repeat(u).take(count));
    }
    schedule.shuffle(&mut g.rng);
    for u in schedule {
        let c = g.rng.gen_range(0..channels.len());
        let text = g.benign_text(u);
        let (name, kind) = channels[c].clone();
        g.push(kind, u, &name, text, None);
    }

    let mut labels: Vec<Label> = std::iter::repeat(Label::Abuse)
        .take(cfg.n_abuse)
        .chain(std::iter::repeat(Label::NonAbuse).take(cfg.n_nonabuse))
        .collect();
    labels.shuffle(&mut g.rng);
    for label in labels {
        let ingame = g.rng.gen_bool(cfg.ingame_share);
        let pool = if ingame { &im_channels } else { &cm_channels };
        let c = *pool.choose(&mut g.rng).expect("channel pools are non-empty");
        let (name, kind) = channels[c].clone();

        let author = match label {
            Label::Abuse => g.rng.gen_range(0..n_abusers),
            Label::NonAbuse => *clean.choose(&mut g.rng).expect("clean users exist"),
        };
        for _ in 0..g.rng.gen_range(0..3) {
            let u = *clean.choose(&mut g.rng).expect("clean users exist");
            let text = g.benign_text(u);
            g.push(kind, u, &name, text, None);
        }
        let text = match label {
            Label::Abuse => g.abuse_text(),
            Label::NonAbuse => g.labeled_benign(author),
        };
        g.push(kind, author, &name, text, Some(label));

        let (lo, hi, react) = match label {
            Label::Abuse => (1, 6, 0.7),
            Label::NonAbuse => (0, 4, 0.05),
        };
        let n_resp = g.rng.gen_range(lo..hi);
        for _ in 0..n_resp {
            let u = if g.rng.gen_bool(0.8) {
                g.rng.gen_range(history_start.max(n_abusers)..n_users)
            } else {
                *clean.choose(&mut g.rng).expect("clean users exist")
            };
            if u == author {
                continue;
            }
            let text = if g.rng.gen_bool(react) {
                g.pick(REACTIONS).to_string()
            } else {
                g.benign_text(u)
            };
            g.push(kind, u, &name, text, None);
        }
    }
    Corpus::new(g.messages)
}
