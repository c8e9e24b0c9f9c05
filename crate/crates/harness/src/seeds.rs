use sha2::{Digest, Sha256};

use crate::config::ExperimentKind;

/// First eight bytes (little endian) of SHA-256 over
/// "mixlab/{master}/{experiment}/{realization}/{role}".
pub fn derive_seed(master: u64, experiment: ExperimentKind, realization: usize, role: &str) -> u64 {
    let label = format!("mixlab/{master}/{}/{realization}/{role}", experiment.as_str());
    let digest = Sha256::digest(label.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roles_and_realizations_separate_streams() {
        let k = ExperimentKind::SweepDissipation;
        let a = derive_seed(1, k, 0, "field");
        assert_eq!(a, derive_seed(1, k, 0, "field"));
        assert_ne!(a, derive_seed(1, k, 1, "field"));
        assert_ne!(a, derive_seed(1, k, 0, "particles"));
        assert_ne!(a, derive_seed(2, k, 0, "field"));
        assert_ne!(a, derive_seed(1, ExperimentKind::Yaglom, 0, "field"));
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
