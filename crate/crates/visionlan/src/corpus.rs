//! Built-in English vocabulary and the train/test split.
//!
//! The corpus is produced from base lemmas plus regular inflections
//! (plural, -ing, -ed, -ly), deduplicated and seeded-sampled down to the
//! requested size. The split is by word identity so test words are unseen
//! during training.

use crate::error::{Result, VlanError};
use crate::rng::{mix, Rng};

const NOUNS: &[&str] = &[
    "house", "mouse", "table", "chair", "window", "door", "floor", "wall", "roof", "garden",
    "tree", "leaf", "branch", "root", "flower", "grass", "stone", "rock", "river", "lake",
    "ocean", "sea", "beach", "sand", "wave", "cloud", "rain", "snow", "storm", "wind",
    "sun", "moon", "star", "sky", "earth", "world", "land", "field", "forest", "hill",
    "valley", "island", "desert", "cave", "cliff", "stream", "pond", "path", "road",
    "street", "bridge", "tower", "castle", "palace", "temple", "church", "school", "office",
    "shop", "store", "market", "farm", "barn", "fence", "gate", "yard", "park", "city",
    "town", "village", "country", "nation", "state", "region", "border", "map", "globe",
    "dog", "cat", "bird", "fish", "horse", "cow", "sheep", "goat", "pig", "duck",
    "goose", "hen", "rabbit", "fox", "wolf", "bear", "lion", "tiger", "monkey", "snake",
    "frog", "turtle", "spider", "bee", "ant", "fly", "worm", "whale", "shark", "crab",
    "eagle", "owl", "crow", "swan", "deer", "moose", "camel", "zebra", "panda", "seal",
    "otter", "badger", "beaver", "donkey", "falcon", "hawk", "heron", "lizard", "mole",
    "parrot", "pigeon", "rat", "raven", "salmon", "trout", "squid", "toad", "weasel",
    "head", "face", "eye", "ear", "nose", "mouth", "tooth", "tongue", "neck", "arm",
    "hand", "finger", "thumb", "leg", "foot", "knee", "heel", "chest", "heart", "bone",
    "skin", "hair", "blood", "brain", "muscle", "elbow", "wrist", "ankle", "spine",
    "bread", "butter", "cheese", "milk", "egg", "meat", "fruit", "apple", "orange",
    "banana", "grape", "lemon", "cherry", "berry", "melon", "peach", "pear", "plum",
    "potato", "tomato", "onion", "carrot", "pepper", "salt", "sugar", "honey", "rice",
    "corn", "wheat", "bean", "pea", "nut", "cake", "pie", "soup", "salad", "sauce",
    "tea", "coffee", "juice", "water", "wine", "beer", "dinner", "lunch", "supper",
    "book", "page", "paper", "pen", "pencil", "ink", "letter", "word", "line", "story",
    "poem", "song", "music", "sound", "voice", "noise", "picture", "photo", "film",
    "stage", "scene", "actor", "artist", "poet", "writer", "reader", "teacher", "doctor",
    "nurse", "farmer", "baker", "butcher", "tailor", "barber", "lawyer", "judge", "king",
    "queen", "prince", "knight", "soldier", "sailor", "pilot", "driver", "guard", "guest",
    "friend", "enemy", "family", "mother", "father", "parent", "child", "baby", "boy",
    "girl", "man", "woman", "person", "people", "crowd", "team", "group", "club",
    "party", "member", "leader", "owner", "worker", "player", "singer", "dancer",
    "hunter", "keeper", "miner", "porter", "rider", "runner", "walker", "watcher",
    "clock", "watch", "bell", "ring", "chain", "rope", "wire", "nail", "screw",
    "hammer", "saw", "axe", "knife", "fork", "spoon", "plate", "bowl", "cup", "glass",
    "bottle", "jar", "box", "bag", "basket", "bucket", "barrel", "board", "brick",
    "candle", "lamp", "torch", "mirror", "brush", "comb", "soap", "towel", "blanket",
    "pillow", "bed", "couch", "desk", "shelf", "drawer", "carpet", "curtain", "stove",
    "oven", "pan", "pot", "kettle", "engine", "wheel", "tire", "brake", "motor",
    "wagon", "cart", "truck", "car", "bus", "train", "boat", "ship", "plane", "rocket",
    "bike", "sled", "canoe", "ferry", "anchor", "sail", "mast", "deck", "cabin",
    "ticket", "coin", "money", "price", "cost", "value", "trade", "profit", "debt",
    "bank", "safe", "lock", "key", "tool", "machine", "device", "signal", "switch",
    "button", "handle", "lever", "spring", "gear", "pump", "pipe", "tube", "tank",
    "coat", "shirt", "dress", "skirt", "pants", "sock", "shoe", "boot", "hat", "cap",
    "glove", "scarf", "belt", "pocket", "collar", "sleeve", "ribbon", "thread",
    "needle", "cloth", "cotton", "wool", "silk", "leather", "fur", "jacket",
    "game", "ball", "bat", "net", "goal", "score", "race", "prize", "medal", "card",
    "dice", "chess", "doll", "toy", "kite", "drum", "flute", "violin", "piano",
    "guitar", "trumpet", "horn", "organ", "harp", "banjo", "cello", "oboe",
    "morning", "evening", "night", "day", "week", "month", "year", "season", "spring",
    "summer", "autumn", "winter", "hour", "minute", "second", "moment", "time",
    "north", "south", "east", "west", "corner", "center", "middle", "edge", "side",
    "top", "bottom", "front", "back", "left", "right", "inside", "outside", "surface",
    "fire", "flame", "smoke", "ash", "coal", "oil", "gas", "steam", "ice", "frost",
    "iron", "steel", "copper", "silver", "gold", "lead", "tin", "zinc", "glass",
    "metal", "wood", "timber", "plank", "log", "bark", "seed", "grain", "straw",
    "dust", "dirt", "mud", "clay", "chalk", "marble", "granite", "gravel", "pearl",
    "diamond", "ruby", "emerald", "crystal", "jewel", "crown", "throne", "sword",
    "shield", "spear", "arrow", "bow", "cannon", "rifle", "bullet", "armor",
    "battle", "war", "peace", "victory", "defeat", "army", "navy", "fleet", "camp",
    "fort", "wall", "moat", "siege", "banner", "flag", "drummer", "bugle",
    "idea", "thought", "dream", "hope", "fear", "doubt", "truth", "lie", "fact",
    "reason", "cause", "effect", "result", "answer", "question", "problem", "riddle",
    "secret", "mystery", "magic", "spell", "wish", "luck", "chance", "fate",
    "health", "wealth", "power", "force", "energy", "speed", "weight", "size",
    "length", "width", "height", "depth", "shape", "form", "color", "shade",
    "light", "shadow", "dark", "glow", "spark", "flash", "beam", "ray",
    "spirit", "soul", "mind", "memory", "wisdom", "skill", "talent", "habit",
    "custom", "law", "rule", "order", "system", "method", "plan", "design",
    "pattern", "model", "copy", "sample", "piece", "part", "whole", "half",
    "number", "figure", "sum", "total", "amount", "dozen", "pair", "couple",
    "circle", "square", "angle", "curve", "point", "dot", "mark", "sign",
    "symbol", "code", "label", "title", "name", "date", "event", "history",
];

const VERBS: &[&str] = &[
    "walk", "run", "jump", "climb", "crawl", "swim", "fly", "float", "sink", "dive",
    "ride", "drive", "travel", "wander", "march", "dance", "skip", "hop", "slide",
    "roll", "spin", "turn", "twist", "bend", "stretch", "reach", "grab", "hold",
    "carry", "lift", "drop", "throw", "catch", "push", "pull", "drag", "slip",
    "open", "close", "lock", "knock", "press", "touch", "rub", "scratch", "scrub",
    "wash", "clean", "wipe", "sweep", "dust", "polish", "paint", "draw", "sketch",
    "write", "read", "spell", "count", "add", "measure", "weigh", "mark", "stamp",
    "print", "copy", "trace", "fold", "cut", "chop", "slice", "carve", "dig",
    "plant", "grow", "water", "pick", "gather", "harvest", "bind", "tie", "wrap",
    "pack", "load", "store", "stack", "pile", "spread", "scatter", "mix", "stir",
    "pour", "fill", "empty", "drain", "boil", "cook", "bake", "roast", "fry",
    "taste", "chew", "swallow", "drink", "feed", "hunt", "fish", "trap", "chase",
    "follow", "lead", "guide", "show", "point", "watch", "look", "stare", "glance",
    "listen", "hear", "smell", "feel", "sense", "notice", "spot", "find", "seek",
    "search", "hide", "cover", "reveal", "discover", "explore", "test", "check",
    "prove", "solve", "guess", "wonder", "think", "know", "learn", "study", "teach",
    "train", "practice", "repeat", "remember", "forget", "remind", "explain",
    "describe", "tell", "say", "speak", "talk", "whisper", "shout", "call", "answer",
    "ask", "beg", "thank", "greet", "welcome", "invite", "visit", "meet", "join",
    "help", "serve", "share", "give", "take", "lend", "borrow", "trade", "sell",
    "buy", "pay", "earn", "spend", "save", "waste", "lose", "win", "gain", "keep",
    "own", "belong", "need", "want", "wish", "hope", "expect", "plan", "decide",
    "choose", "prefer", "agree", "refuse", "accept", "allow", "forbid", "warn",
    "protect", "defend", "attack", "fight", "strike", "hit", "kick", "punch",
    "break", "crack", "smash", "crush", "tear", "rip", "burn", "melt", "freeze",
    "build", "make", "create", "form", "shape", "mold", "forge", "repair", "mend",
    "fix", "change", "improve", "grow", "shrink", "expand", "rise", "fall", "drop",
    "start", "begin", "finish", "end", "stop", "pause", "wait", "stay", "remain",
    "leave", "depart", "arrive", "return", "enter", "exit", "pass", "cross",
    "rest", "sleep", "wake", "dream", "yawn", "breathe", "sigh", "laugh", "smile",
    "grin", "frown", "cry", "weep", "sob", "groan", "moan", "cheer", "clap",
    "sing", "hum", "whistle", "play", "act", "pretend", "perform", "juggle",
    "work", "labor", "toil", "manage", "direct", "control", "rule", "govern",
    "obey", "serve", "trust", "believe", "doubt", "fear", "worry", "care",
    "love", "like", "enjoy", "hate", "blame", "praise", "honor", "respect",
    "happen", "occur", "appear", "vanish", "fade", "glow", "shine", "sparkle",
    "flash", "flicker", "drip", "flow", "splash", "soak", "dry", "wet",
];

const ADJECTIVES: &[&str] = &[
    "quick", "slow", "fast", "sudden", "gradual", "calm", "quiet", "loud", "noisy",
    "bright", "dark", "light", "heavy", "soft", "hard", "smooth", "rough", "sharp",
    "blunt", "clean", "dirty", "fresh", "stale", "sweet", "sour", "bitter", "salty",
    "hot", "cold", "warm", "cool", "wet", "dry", "damp", "moist", "frozen",
    "big", "small", "large", "tiny", "huge", "giant", "grand", "great", "little",
    "long", "short", "tall", "deep", "shallow", "wide", "narrow", "thick", "thin",
    "broad", "near", "far", "close", "distant", "high", "low", "steep", "flat",
    "round", "square", "straight", "curved", "bent", "crooked", "even", "level",
    "old", "new", "young", "ancient", "modern", "early", "late", "recent",
    "rich", "poor", "cheap", "costly", "rare", "common", "usual", "strange",
    "odd", "normal", "plain", "fancy", "simple", "complex", "easy", "tough",
    "strong", "weak", "firm", "loose", "tight", "slack", "stiff", "limp",
    "brave", "timid", "bold", "shy", "proud", "humble", "kind", "cruel",
    "gentle", "fierce", "wild", "tame", "polite", "rude", "honest", "false",
    "true", "real", "fake", "loyal", "noble", "mean", "greedy", "generous",
    "happy", "sad", "glad", "merry", "joyful", "gloomy", "angry", "furious",
    "eager", "keen", "lazy", "idle", "busy", "active", "lively", "weary",
    "tired", "sleepy", "awake", "alert", "careful", "careless", "wise", "foolish",
    "clever", "smart", "dull", "bright", "curious", "certain", "sure", "ready",
    "safe", "risky", "lucky", "happy", "hungry", "thirsty", "full", "empty",
    "open", "shut", "free", "fixed", "public", "private", "single", "double",
    "whole", "broken", "solid", "hollow", "dense", "sparse", "pure", "mixed",
    "clear", "cloudy", "foggy", "sunny", "rainy", "windy", "stormy", "misty",
    "silent", "vocal", "visible", "hidden", "secret", "famous", "unknown",
    "useful", "useless", "healthy", "sick", "strong", "feeble", "swift", "static",
];

/// Regular plural.
fn pluralize(word: &str) -> String {
    let b = word.as_bytes();
    let last = *b.last().unwrap() as char;
    if word.ends_with('s') || word.ends_with('x') || word.ends_with('z')
        || word.ends_with("ch") || word.ends_with("sh")
    {
        format!("{word}es")
    } else if last == 'y' && b.len() >= 2 && !is_vowel(b[b.len() - 2] as char) {
        format!("{}ies", &word[..word.len() - 1])
    } else {
        format!("{word}s")
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Whether the regular -ed/-ing doubling rule applies.
fn doubles_final(word: &str) -> bool {
    let b = word.as_bytes();
    if b.len() < 3 || b.len() > 4 {
        return false;
    }
    let (a, m, z) = (b[b.len() - 3] as char, b[b.len() - 2] as char, b[b.len() - 1] as char);
    !is_vowel(a) && is_vowel(m) && !is_vowel(z) && !matches!(z, 'w' | 'x' | 'y')
}

fn gerund(word: &str) -> String {
    if word.ends_with('e') && !word.ends_with("ee") {
        format!("{}ing", &word[..word.len() - 1])
    } else if doubles_final(word) {
        let last = word.chars().last().unwrap();
        format!("{word}{last}ing")
    } else {
        format!("{word}ing")
    }
}

fn past(word: &str) -> String {
    let b = word.as_bytes();
    if word.ends_with('e') {
        format!("{word}d")
    } else if b.last() == Some(&b'y') && b.len() >= 2 && !is_vowel(b[b.len() - 2] as char) {
        format!("{}ied", &word[..word.len() - 1])
    } else if doubles_final(word) {
        let last = word.chars().last().unwrap();
        format!("{word}{last}ed")
    } else {
        format!("{word}ed")
    }
}

fn adverb(word: &str) -> String {
    let b = word.as_bytes();
    if b.last() == Some(&b'y') && b.len() >= 2 && !is_vowel(b[b.len() - 2] as char) {
        format!("{}ily", &word[..word.len() - 1])
    } else if word.ends_with("le") {
        format!("{}y", &word[..word.len() - 1])
    } else {
        format!("{word}ly")
    }
}

/// Every generated wordform within the length bounds, deduplicated and sorted.
pub fn word_pool(max_len: usize) -> Vec<String> {
    let mut pool: Vec<String> = Vec::new();
    for &n in NOUNS {
        pool.push(n.to_string());
        pool.push(pluralize(n));
    }
    for &v in VERBS {
        pool.push(v.to_string());
        pool.push(pluralize(v));
        pool.push(gerund(v));
        pool.push(past(v));
    }
    for &a in ADJECTIVES {
        pool.push(a.to_string());
        pool.push(adverb(a));
    }
    pool.retain(|w| w.len() >= 2 && w.len() <= max_len && w.chars().all(|c| c.is_ascii_lowercase()));
    pool.sort();
    pool.dedup();
    pool
}

/// Draws `size` distinct words from the pool, deterministically per seed.
pub fn build_corpus(size: usize, max_len: usize, seed: u64) -> Result<Vec<String>> {
    let mut pool = word_pool(max_len);
    if pool.len() < size {
        return Err(VlanError::Config(format!(
            "corpus of {size} words requested but only {} forms fit max_len {max_len}",
            pool.len()
        )));
    }
    let mut rng = Rng::new(mix(&[seed, 0x776f_7264]));
    rng.shuffle(&mut pool);
    pool.truncate(size);
    pool.sort();
    Ok(pool)
}

/// Splits by word identity: ~`train_frac` of words train, the rest test.
pub fn split_corpus(words: &[String], train_frac: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut order: Vec<usize> = (0..words.len()).collect();
    let mut rng = Rng::new(mix(&[seed, 0x7370_6c69]));
    rng.shuffle(&mut order);
    let n_train = ((words.len() as f64) * train_frac).round() as usize;
    let train: Vec<String> = order[..n_train].iter().map(|&i| words[i].clone()).collect();
    let test: Vec<String> = order[n_train..].iter().map(|&i| words[i].clone()).collect();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn pool_is_large_enough_for_default_corpus() {
        let pool = word_pool(10);
        assert!(pool.len() >= 2000, "pool has only {} words", pool.len());
    }

    #[test]
    fn inflection_spot_checks() {
        assert_eq!(pluralize("house"), "houses");
        assert_eq!(pluralize("box"), "boxes");
        assert_eq!(pluralize("berry"), "berries");
        assert_eq!(gerund("make"), "making");
        assert_eq!(gerund("run"), "running");
        assert_eq!(gerund("walk"), "walking");
        assert_eq!(past("bake"), "baked");
        assert_eq!(past("carry"), "carried");
        assert_eq!(past("stop"), "stopped");
        assert_eq!(adverb("quick"), "quickly");
        assert_eq!(adverb("happy"), "happily");
        assert_eq!(adverb("simple"), "simply");
    }

    #[test]
    fn corpus_is_deterministic_and_unique() {
        let a = build_corpus(2000, 10, 1).unwrap();
        let b = build_corpus(2000, 10, 1).unwrap();
        assert_eq!(a, b);
        let set: HashSet<&String> = a.iter().collect();
        assert_eq!(set.len(), 2000);
        for w in &a {
            assert!(w.len() <= 10);
            assert!(w.chars().all(|c| c.is_ascii_lowercase()));
        }
    }

    #[test]
    fn split_is_disjoint_by_identity() {
        let corpus = build_corpus(500, 10, 3).unwrap();
        let (train, test) = split_corpus(&corpus, 0.9, 3);
        assert_eq!(train.len(), 450);
        assert_eq!(test.len(), 50);
        let train_set: HashSet<&String> = train.iter().collect();
        for w in &test {
            assert!(!train_set.contains(w), "test word '{w}' leaked into training");
        }
    }
}
