use std::collections::{BTreeMap, BTreeSet};

use super::grammar::{Segment, SegmentLabel, ServiceName, Step, TreeName};
use super::{FaceId, Label, NameError};
use crate::agent::MicroserviceDescriptor;

pub type ChartMicroservice = MicroserviceDescriptor;

/// One input branch of a chart: microservices ordered from the head side
/// toward the data, then the data they consume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChartSegment {
    pub label: SegmentLabel,
    pub microservices: Vec<ChartMicroservice>,
    pub data: Label,
}

/// Developer-supplied service description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceChart {
    pub head: ChartMicroservice,
    pub segments: Vec<ChartSegment>,
}

impl ServiceChart {
    pub fn head_label(&self) -> &Label {
        &self.head.id
    }

    pub fn validate(&self) -> Result<(), NameError> {
        let invalid = |msg: String| Err(NameError::InvalidChart(msg));
        if self.segments.is_empty() {
            return invalid(format!("chart {} has no segments", self.head.id));
        }
        let mut labels = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for ms in self.microservices() {
            if ms.exec_time == 0 {
                return invalid(format!("microservice {} has zero execution time", ms.id));
            }
            if !ids.insert(&ms.id) {
                return invalid(format!("duplicate microservice id {}", ms.id));
            }
        }
        for segment in &self.segments {
            if !labels.insert(&segment.label) {
                return invalid(format!("duplicate segment label {}", segment.label));
            }
            if ids.contains(&segment.data) {
                return invalid(format!("data {} shadows a microservice id", segment.data));
            }
        }
        Ok(())
    }

    /// Head first, then every segment's microservices in chart order.
    pub fn microservices(&self) -> impl Iterator<Item = &ChartMicroservice> {
        std::iter::once(&self.head).chain(self.segments.iter().flat_map(|s| s.microservices.iter()))
    }

    pub fn microservice(&self, id: &Label) -> Option<&ChartMicroservice> {
        self.microservices().find(|m| &m.id == id)
    }
}

/// Position of a hop inside a tree: hop `index` of `segment` leads from the
/// element before it (the head for index 0) to element `index`, where the
/// segment's data is the element after its last microservice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HopKey {
    pub segment: SegmentLabel,
    pub index: usize,
}

/// A chart resolved onto the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceTree {
    pub chart: ServiceChart,
    /// Faces from the requesting agent to the head's agent.
    pub entry_faces: Vec<FaceId>,
    /// Microservice id to hosting agent id, head included.
    pub placement: BTreeMap<Label, Label>,
    pub hop_faces: BTreeMap<HopKey, Vec<FaceId>>,
}

impl ServiceTree {
    pub fn agent_of(&self, microservice: &Label) -> Option<&Label> {
        self.placement.get(microservice)
    }

    /// Serializes the tree as an exec name with every hop's faces inlined
    /// before the element it reaches.
    pub fn to_name(&self) -> Result<ServiceName, NameError> {
        let mut segments = Vec::with_capacity(self.chart.segments.len());
        for segment in &self.chart.segments {
            let elements = segment
                .microservices
                .iter()
                .map(|m| &m.id)
                .chain(std::iter::once(&segment.data));
            let steps = elements
                .enumerate()
                .map(|(index, element)| {
                    let key = HopKey {
                        segment: segment.label.clone(),
                        index,
                    };
                    self.hop_faces
                        .get(&key)
                        .map(|faces| Step::via(faces.clone(), element.clone()))
                        .ok_or_else(|| NameError::MissingHop {
                            segment: segment.label.to_string(),
                            index,
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            segments.push(Segment {
                label: segment.label.clone(),
                steps,
            });
        }
        Ok(ServiceName::Tree {
            exec: true,
            tree: TreeName {
                head_faces: self.entry_faces.clone(),
                head: self.chart.head.id.clone(),
                segments,
            },
        })
    }
}
