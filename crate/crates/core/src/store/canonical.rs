use zeroize::Zeroizing;

use crate::error::CredentialError;

/// Joins keywords in a canonical secret. Pack validation forbids it inside
/// keywords, which makes the join injective.
pub const SEPARATOR: char = '\u{1f}';

/// The ordered keywords joined with [`SEPARATOR`]. Wiped on drop.
pub struct CanonicalSecret(Zeroizing<String>);

impl CanonicalSecret {
    pub fn new<S: AsRef<str>>(keywords: &[S]) -> Result<Self, CredentialError> {
        let mut joined = Zeroizing::new(String::new());
        for (i, kw) in keywords.iter().enumerate() {
            let kw = kw.as_ref();
            if kw.contains(SEPARATOR) {
                return Err(CredentialError::SeparatorInKeyword);
            }
            if i > 0 {
                joined.push(SEPARATOR);
            }
            joined.push_str(kw);
        }
        Ok(Self(joined))
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}
