//! Interest, Data and Deploy packets and their canonical TLV encoding.
//!
//! Every packet is `type | LEB128 length | value`. Names are a Name TLV
//! (0x07) holding one component TLV (0x08, UTF-8) per name component.
//! Integers are LEB128 inside their own TLV. Field order is fixed, so equal
//! packets always encode to identical bytes.

pub mod tlv;

use thiserror::Error;

use crate::agent::{AgentStatus, MicroserviceDescriptor, NeighborDelay};
use crate::names::{FaceId, Label, NameError, ServiceName};
use tlv::{ReadError, Reader};

pub const TYPE_INTEREST: u8 = 0x05;
pub const TYPE_DATA: u8 = 0x06;
pub const TYPE_DEPLOY: u8 = 0x44;

pub const NAME: u8 = 0x07;
pub const COMPONENT: u8 = 0x08;
pub const NONCE: u8 = 0x0A;
pub const HOP_COUNT: u8 = 0x0C;
pub const CONTENT: u8 = 0x15;
pub const SIGNATURE: u8 = 0x17;

pub const FACE_CHAIN: u8 = 0x40;
pub const FACE: u8 = 0x41;
pub const TARGET: u8 = 0x42;
pub const MICROSERVICE: u8 = 0x43;
pub const MS_ID: u8 = 0x45;
pub const MS_EXEC_TIME: u8 = 0x46;
pub const MS_STORAGE: u8 = 0x47;
pub const MS_COMPUTE: u8 = 0x48;
pub const MS_TAG: u8 = 0x49;

pub const STATUS: u8 = 0x80;
pub const STATUS_AGENT: u8 = 0x81;
pub const STATUS_BATTERY: u8 = 0x82;
pub const STATUS_STORAGE_FREE: u8 = 0x83;
pub const STATUS_STORAGE_TOTAL: u8 = 0x84;
pub const STATUS_COMPUTE_FREE: u8 = 0x85;
pub const STATUS_NEIGHBOR: u8 = 0x86;
pub const NEIGHBOR_FACE: u8 = 0x87;
pub const NEIGHBOR_AGENT: u8 = 0x88;
pub const NEIGHBOR_DELAY: u8 = 0x89;
pub const STATUS_HOSTED: u8 = 0x8A;
pub const STATUS_FAILURES: u8 = 0x8B;

/// Placeholder signature carried by every Data packet.
pub const SIGNATURE_PLACEHOLDER: [u8; 8] = [0; 8];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("truncated packet")]
    TruncatedPacket,
    #[error("unknown packet type 0x{0:02x}")]
    UnknownType(u8),
    #[error("malformed TLV: {0}")]
    MalformedTlv(String),
}

impl From<ReadError> for CodecError {
    fn from(e: ReadError) -> Self {
        CodecError::MalformedTlv(e.to_string())
    }
}

impl From<NameError> for CodecError {
    fn from(e: NameError) -> Self {
        CodecError::MalformedTlv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterestPacket {
    pub name: ServiceName,
    pub nonce: u64,
    pub hop_count: u32,
}

impl InterestPacket {
    pub fn new(name: ServiceName, nonce: u64) -> Self {
        InterestPacket {
            name,
            nonce,
            hop_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPacket {
    pub name: ServiceName,
    /// Always empty for monitor Data; statuses travel in `status_list`.
    pub payload: Vec<u8>,
    /// Present exactly when the name is a monitor name.
    pub status_list: Option<Vec<AgentStatus>>,
    pub signature: [u8; 8],
}

impl DataPacket {
    pub fn new(name: ServiceName, payload: Vec<u8>) -> Self {
        DataPacket {
            name,
            payload,
            status_list: None,
            signature: SIGNATURE_PLACEHOLDER,
        }
    }

    pub fn monitor(statuses: Vec<AgentStatus>) -> Self {
        DataPacket {
            name: ServiceName::Monitor,
            payload: Vec::new(),
            status_list: Some(statuses),
            signature: SIGNATURE_PLACEHOLDER,
        }
    }
}

/// Source-routed microservice installation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeployPacket {
    /// Faces still to cross.
    pub faces: Vec<FaceId>,
    /// Final chain element: the agent that installs the payload.
    pub target: Label,
    pub microservice: MicroserviceDescriptor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Interest(InterestPacket),
    Data(DataPacket),
    Deploy(DeployPacket),
}

impl Packet {
    pub fn type_name(&self) -> &'static str {
        match self {
            Packet::Interest(_) => "interest",
            Packet::Data(_) => "data",
            Packet::Deploy(_) => "deploy",
        }
    }

    pub fn name(&self) -> Option<&ServiceName> {
        match self {
            Packet::Interest(i) => Some(&i.name),
            Packet::Data(d) => Some(&d.name),
            Packet::Deploy(_) => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_packet(self)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        decode_packet(bytes)
    }
}

impl From<InterestPacket> for Packet {
    fn from(p: InterestPacket) -> Self {
        Packet::Interest(p)
    }
}

impl From<DataPacket> for Packet {
    fn from(p: DataPacket) -> Self {
        Packet::Data(p)
    }
}

impl From<DeployPacket> for Packet {
    fn from(p: DeployPacket) -> Self {
        Packet::Deploy(p)
    }
}

fn write_name(out: &mut Vec<u8>, name: &ServiceName) {
    let mut value = Vec::new();
    for component in name.components() {
        tlv::write(&mut value, COMPONENT, component.as_bytes());
    }
    tlv::write(out, NAME, &value);
}

fn write_status(out: &mut Vec<u8>, status: &AgentStatus) {
    let mut value = Vec::new();
    tlv::write(&mut value, STATUS_AGENT, status.agent_id.as_str().as_bytes());
    tlv::write_uint(&mut value, STATUS_BATTERY, status.battery.into());
    tlv::write_uint(&mut value, STATUS_STORAGE_FREE, status.storage_free);
    tlv::write_uint(&mut value, STATUS_STORAGE_TOTAL, status.storage_total);
    tlv::write_uint(&mut value, STATUS_COMPUTE_FREE, status.compute_free);
    for n in &status.neighbor_delays {
        let mut nv = Vec::new();
        tlv::write_uint(&mut nv, NEIGHBOR_FACE, n.face.into());
        tlv::write(&mut nv, NEIGHBOR_AGENT, n.neighbor.as_str().as_bytes());
        tlv::write_uint(&mut nv, NEIGHBOR_DELAY, n.delay);
        tlv::write(&mut value, STATUS_NEIGHBOR, &nv);
    }
    for data in &status.hosted_data {
        tlv::write(&mut value, STATUS_HOSTED, data.as_str().as_bytes());
    }
    tlv::write_uint(&mut value, STATUS_FAILURES, status.install_failures.into());
    tlv::write(out, STATUS, &value);
}

/// Canonical byte encoding of a packet.
pub fn encode_packet(packet: &Packet) -> Vec<u8> {
    let mut value = Vec::new();
    let typ = match packet {
        Packet::Interest(i) => {
            write_name(&mut value, &i.name);
            tlv::write_uint(&mut value, NONCE, i.nonce);
            tlv::write_uint(&mut value, HOP_COUNT, i.hop_count.into());
            TYPE_INTEREST
        }
        Packet::Data(d) => {
            write_name(&mut value, &d.name);
            let mut content = d.payload.clone();
            for status in d.status_list.iter().flatten() {
                write_status(&mut content, status);
            }
            tlv::write(&mut value, CONTENT, &content);
            tlv::write(&mut value, SIGNATURE, &d.signature);
            TYPE_DATA
        }
        Packet::Deploy(p) => {
            let mut chain = Vec::new();
            for &face in &p.faces {
                tlv::write_uint(&mut chain, FACE, face.into());
            }
            tlv::write(&mut chain, TARGET, p.target.as_str().as_bytes());
            tlv::write(&mut value, FACE_CHAIN, &chain);
            let ms = &p.microservice;
            let mut mv = Vec::new();
            tlv::write(&mut mv, MS_ID, ms.id.as_str().as_bytes());
            tlv::write_uint(&mut mv, MS_EXEC_TIME, ms.exec_time);
            tlv::write_uint(&mut mv, MS_STORAGE, ms.storage_demand);
            tlv::write_uint(&mut mv, MS_COMPUTE, ms.compute_demand);
            tlv::write(&mut mv, MS_TAG, ms.transform_tag.as_bytes());
            tlv::write(&mut value, MICROSERVICE, &mv);
            TYPE_DEPLOY
        }
    };
    let mut out = Vec::with_capacity(value.len() + 4);
    tlv::write(&mut out, typ, &value);
    out
}

fn malformed(msg: impl Into<String>) -> CodecError {
    CodecError::MalformedTlv(msg.into())
}

fn read_label(r: &mut Reader<'_>, typ: u8) -> Result<Label, CodecError> {
    Ok(Label::new(r.expect_str(typ)?)?)
}

fn read_name(r: &mut Reader<'_>) -> Result<ServiceName, CodecError> {
    let mut components = Reader::new(r.expect(NAME)?);
    let mut text = String::new();
    while !components.is_empty() {
        text.push('/');
        text.push_str(components.expect_str(COMPONENT)?);
    }
    let name = ServiceName::parse(&text)?;
    name.validate()?;
    Ok(name)
}

fn small<T: TryFrom<u64>>(n: u64, what: &str) -> Result<T, CodecError> {
    T::try_from(n).map_err(|_| malformed(format!("{what} out of range")))
}

fn read_status(value: &[u8]) -> Result<AgentStatus, CodecError> {
    let mut r = Reader::new(value);
    let agent_id = read_label(&mut r, STATUS_AGENT)?;
    let battery: u8 = small(r.expect_uint(STATUS_BATTERY)?, "battery")?;
    if battery > 100 {
        return Err(malformed("battery above 100"));
    }
    let storage_free = r.expect_uint(STATUS_STORAGE_FREE)?;
    let storage_total = r.expect_uint(STATUS_STORAGE_TOTAL)?;
    let compute_free = r.expect_uint(STATUS_COMPUTE_FREE)?;
    let mut neighbor_delays = Vec::new();
    while let Some(nv) = r.optional(STATUS_NEIGHBOR)? {
        let mut nr = Reader::new(nv);
        let face = small(nr.expect_uint(NEIGHBOR_FACE)?, "face")?;
        let neighbor = read_label(&mut nr, NEIGHBOR_AGENT)?;
        let delay = nr.expect_uint(NEIGHBOR_DELAY)?;
        nr.finish()?;
        neighbor_delays.push(NeighborDelay {
            face,
            neighbor,
            delay,
        });
    }
    let mut hosted_data = Vec::new();
    while let Some(dv) = r.optional(STATUS_HOSTED)? {
        let text = std::str::from_utf8(dv).map_err(|_| malformed("hosted data not UTF-8"))?;
        hosted_data.push(Label::new(text)?);
    }
    let install_failures = small(r.expect_uint(STATUS_FAILURES)?, "install failures")?;
    r.finish()?;
    Ok(AgentStatus {
        agent_id,
        battery,
        storage_free,
        storage_total,
        compute_free,
        neighbor_delays,
        hosted_data,
        install_failures,
    })
}

/// Decodes one packet; the input must be exactly one packet TLV.
pub fn decode_packet(bytes: &[u8]) -> Result<Packet, CodecError> {
    let &typ = bytes.first().ok_or(CodecError::TruncatedPacket)?;
    if ![TYPE_INTEREST, TYPE_DATA, TYPE_DEPLOY].contains(&typ) {
        return Err(CodecError::UnknownType(typ));
    }
    let mut outer = Reader::new(bytes);
    let value = match outer.read_any() {
        Ok((_, value)) => value,
        Err(ReadError::Truncated) => return Err(CodecError::TruncatedPacket),
        Err(e) => return Err(e.into()),
    };
    outer.finish().map_err(|_| malformed("trailing bytes after packet"))?;

    let mut r = Reader::new(value);
    let packet = match typ {
        TYPE_INTEREST => {
            let name = read_name(&mut r)?;
            let nonce = r.expect_uint(NONCE)?;
            let hop_count = small(r.expect_uint(HOP_COUNT)?, "hop count")?;
            Packet::Interest(InterestPacket {
                name,
                nonce,
                hop_count,
            })
        }
        TYPE_DATA => {
            let name = read_name(&mut r)?;
            let content = r.expect(CONTENT)?;
            let (payload, status_list) = if name.is_monitor() {
                let mut cr = Reader::new(content);
                let mut statuses = Vec::new();
                while !cr.is_empty() {
                    statuses.push(read_status(cr.expect(STATUS)?)?);
                }
                (Vec::new(), Some(statuses))
            } else {
                (content.to_vec(), None)
            };
            let signature = r
                .expect(SIGNATURE)?
                .try_into()
                .map_err(|_| malformed("signature must be 8 bytes"))?;
            Packet::Data(DataPacket {
                name,
                payload,
                status_list,
                signature,
            })
        }
        TYPE_DEPLOY => {
            let mut chain = Reader::new(r.expect(FACE_CHAIN)?);
            let mut faces = Vec::new();
            while chain.peek_type() == Some(FACE) {
                faces.push(small(chain.expect_uint(FACE)?, "face")?);
            }
            let target = read_label(&mut chain, TARGET)?;
            chain.finish()?;
            let mut mr = Reader::new(r.expect(MICROSERVICE)?);
            let id = read_label(&mut mr, MS_ID)?;
            let exec_time = mr.expect_uint(MS_EXEC_TIME)?;
            if exec_time == 0 {
                return Err(malformed("zero execution time"));
            }
            let storage_demand = mr.expect_uint(MS_STORAGE)?;
            let compute_demand = mr.expect_uint(MS_COMPUTE)?;
            let transform_tag = mr.expect_str(MS_TAG)?.to_string();
            mr.finish()?;
            Packet::Deploy(DeployPacket {
                faces,
                target,
                microservice: MicroserviceDescriptor {
                    id,
                    exec_time,
                    storage_demand,
                    compute_demand,
                    transform_tag,
                },
            })
        }
        _ => unreachable!(),
    };
    r.finish()?;
    Ok(packet)
}
