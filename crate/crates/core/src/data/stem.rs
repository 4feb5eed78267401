/// Rule-based suffix stripper for `-ing`, `-ly`, `-ed`, `-es` and `-s`.
/// Rules are applied until none fits, so `stem(stem(w)) == stem(w)`.
pub fn stem(word: &str) -> String {
    let mut w = word.to_string();
    while let Some(next) = strip_once(&w) {
        w = next;
    }
    w
}

const MIN_STEM: usize = 3;

fn strip_once(w: &str) -> Option<String> {
    let keep = |suffix: &str| -> Option<String> {
        let base = w.strip_suffix(suffix)?;
        (base.chars().count() >= MIN_STEM).then(|| base.to_string())
    };
    for suffix in ["ing", "ly", "ed"] {
        if let Some(b) = keep(suffix) {
            return Some(b);
        }
    }
    if let Some(b) = keep("es") {
        if ["s", "x", "z", "ch", "sh"].iter().any(|e| b.ends_with(e)) {
            return Some(b);
        }
    }
    if w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") {
        return None;
    }
    keep("s")
}
