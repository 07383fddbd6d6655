use std::hash::Hasher;

use fnv::FnvHasher;

use crate::names::{Label, ServiceName};
use crate::packets::tlv;

/// A serverless microservice as carried in Deploy packets and stored in an
/// agent's repository.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MicroserviceDescriptor {
    pub id: Label,
    /// Milliseconds; always positive.
    pub exec_time: u64,
    pub storage_demand: u64,
    pub compute_demand: u64,
    /// Short tag mixed into the deterministic output payload.
    pub transform_tag: String,
}

impl MicroserviceDescriptor {
    pub fn new(
        id: Label,
        exec_time: u64,
        storage_demand: u64,
        compute_demand: u64,
        transform_tag: impl Into<String>,
    ) -> Self {
        MicroserviceDescriptor {
            id,
            exec_time,
            storage_demand,
            compute_demand,
            transform_tag: transform_tag.into(),
        }
    }
}

/// 64-bit FNV-1a digest.
pub fn digest(bytes: &[u8]) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(bytes);
    hasher.finish()
}

const RESULT_TAG: u8 = 0x60;
const RESULT_INPUT: u8 = 0x61;
const RESULT_DIGEST: u8 = 0x62;

/// Deterministic stand-in for running `ms` over `inputs`.
///
/// The payload encodes the transform tag, the input names in the given
/// order, and a digest over the concatenated input payloads, so the result
/// depends on input order.
pub fn run_microservice(ms: &MicroserviceDescriptor, inputs: &[(ServiceName, Vec<u8>)]) -> Vec<u8> {
    let mut out = Vec::new();
    tlv::write(&mut out, RESULT_TAG, ms.transform_tag.as_bytes());
    let mut concatenated = Vec::new();
    for (name, payload) in inputs {
        tlv::write(&mut out, RESULT_INPUT, name.to_string().as_bytes());
        concatenated.extend_from_slice(payload);
    }
    tlv::write(&mut out, RESULT_DIGEST, &digest(&concatenated).to_le_bytes());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(s: &str) -> ServiceName {
        ServiceName::parse(s).unwrap()
    }

    fn va() -> MicroserviceDescriptor {
        MicroserviceDescriptor::new(Label::new("videoanalysis").unwrap(), 20, 1, 1, "va")
    }

    #[test]
    fn payload_carries_tag_names_and_digest() {
        let b = b"frame".to_vec();
        let out = run_microservice(&va(), &[(name("/video-aircraft320"), b.clone())]);
        let mut expected = vec![RESULT_TAG, 2, b'v', b'a', RESULT_INPUT, 18];
        expected.extend_from_slice(b"/video-aircraft320");
        expected.extend_from_slice(&[RESULT_DIGEST, 8]);
        expected.extend_from_slice(&digest(&b).to_le_bytes());
        assert_eq!(out, expected);
    }

    #[test]
    fn deterministic_and_order_sensitive() {
        let a = (name("/a"), vec![1, 2]);
        let b = (name("/b"), vec![3]);
        let one = run_microservice(&va(), &[a.clone(), b.clone()]);
        assert_eq!(one, run_microservice(&va(), &[a.clone(), b.clone()]));
        assert_ne!(one, run_microservice(&va(), &[b, a]));
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(digest(b""), 0xcbf29ce484222325);
        assert_eq!(digest(b"a"), 0xaf63dc4c8601ec8c);
    }
}
