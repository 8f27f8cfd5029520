use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 over the parts, each terminated by a NUL byte so that
/// `("ab", "c")` and `("a", "bc")` hash differently.
pub(crate) fn digest_parts<I, S>(parts: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_ref());
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())
}

/// 16-hex-character content id.
pub(crate) fn short_id<I, S>(parts: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut full = digest_parts(parts);
    full.truncate(16);
    full
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separator_prevents_concatenation_collisions() {
        assert_ne!(short_id(["ab", "c"]), short_id(["a", "bc"]));
        assert_eq!(short_id(["x"]).len(), 16);
    }
}
