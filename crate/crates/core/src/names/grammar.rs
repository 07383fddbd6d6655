use std::fmt;
use std::str::FromStr;

use super::{face_token, segment_token, FaceId, Label, NameError, PREFIX, PREFIX_ALIASES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Command {
    None,
    Exec,
    Lookup,
    Retrieve,
    Monitor,
    Deploy,
}

impl Command {
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            Command::None => None,
            Command::Exec => Some("exec"),
            Command::Lookup => Some("lookup"),
            Command::Retrieve => Some("retrieve"),
            Command::Monitor => Some("monitor"),
            Command::Deploy => Some("deploy"),
        }
    }

    fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "exec" => Command::Exec,
            "lookup" => Command::Lookup,
            "retrieve" => Command::Retrieve,
            "monitor" => Command::Monitor,
            "deploy" => Command::Deploy,
            _ => return None,
        })
    }
}

/// Deadline metadata of a lookup name, both in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LookupMeta {
    pub execution_time: u64,
    pub triggering_time: u64,
}

/// One hop of a chain: the faces to cross, then the element reached.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub faces: Vec<FaceId>,
    pub element: Label,
}

impl Step {
    pub fn local(element: Label) -> Self {
        Step {
            faces: Vec::new(),
            element,
        }
    }

    pub fn via(faces: Vec<FaceId>, element: Label) -> Self {
        Step { faces, element }
    }
}

/// `S<digits>`; the digits are a level path (`S12` = level 1, branch 2).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentLabel(String);

impl SegmentLabel {
    pub fn new(text: &str) -> Result<Self, NameError> {
        segment_token(text)
            .map(|digits| SegmentLabel(digits.to_string()))
            .ok_or_else(|| NameError::malformed(text, "not a segment label"))
    }

    pub fn level_path(&self) -> &str {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segment {
    pub label: SegmentLabel,
    pub steps: Vec<Step>,
}

/// Head-rooted form of a name: faces leading to the head, the head, and
/// its input segments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeName {
    pub head_faces: Vec<FaceId>,
    pub head: Label,
    pub segments: Vec<Segment>,
}

/// A parsed named-service name.
///
/// `Chain` and `Tree` are the executable bodies; `exec` records whether the
/// `/sd-nsn/exec` prefix was present.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ServiceName {
    Chain { exec: bool, steps: Vec<Step> },
    Tree { exec: bool, tree: TreeName },
    Lookup { head: Label, meta: LookupMeta },
    Retrieve { head: Label, requester: Option<Label> },
    Monitor,
    Deploy { head: Option<Label> },
}

/// Interest produced by consuming the local element of a name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Child {
    /// Face the child Interest leaves on; `None` when the next element is
    /// on the same agent.
    pub face: Option<FaceId>,
    pub name: ServiceName,
}

impl ServiceName {
    pub fn chain(steps: Vec<Step>) -> Self {
        ServiceName::Chain { exec: false, steps }
    }

    /// Single-element plain name such as `/video-aircraft320`.
    pub fn element(label: Label) -> Self {
        ServiceName::chain(vec![Step::local(label)])
    }

    pub fn lookup(head: Label, execution_time: u64, triggering_time: u64) -> Self {
        ServiceName::Lookup {
            head,
            meta: LookupMeta {
                execution_time,
                triggering_time,
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self, NameError> {
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| NameError::malformed(text, "name must begin with `/`"))?;
        let components: Vec<&str> = rest.split('/').collect();
        if components.iter().any(|c| c.is_empty()) {
            return Err(NameError::malformed(text, "empty component"));
        }
        let first = components[0];
        if first == PREFIX || PREFIX_ALIASES.contains(&first) {
            let keyword = components
                .get(1)
                .ok_or_else(|| NameError::malformed(text, "missing command"))?;
            let command = Command::from_keyword(keyword)
                .ok_or_else(|| NameError::malformed(text, format!("unknown command `{keyword}`")))?;
            parse_command(text, command, &components[2..])
        } else {
            parse_body(text, false, &components)
        }
    }

    pub fn command(&self) -> Command {
        match self {
            ServiceName::Chain { exec: true, .. } | ServiceName::Tree { exec: true, .. } => {
                Command::Exec
            }
            ServiceName::Chain { .. } | ServiceName::Tree { .. } => Command::None,
            ServiceName::Lookup { .. } => Command::Lookup,
            ServiceName::Retrieve { .. } => Command::Retrieve,
            ServiceName::Monitor => Command::Monitor,
            ServiceName::Deploy { .. } => Command::Deploy,
        }
    }

    pub fn is_executable(&self) -> bool {
        matches!(self, ServiceName::Chain { .. } | ServiceName::Tree { .. })
    }

    pub fn is_monitor(&self) -> bool {
        matches!(self, ServiceName::Monitor)
    }

    /// Checks the structural invariants that the type does not enforce.
    pub fn validate(&self) -> Result<(), NameError> {
        let fail = |reason: &str| Err(NameError::malformed(&self.to_string(), reason));
        match self {
            ServiceName::Chain { steps, .. } if steps.is_empty() => fail("empty chain"),
            ServiceName::Tree { tree, .. } => {
                if tree.segments.is_empty() {
                    return fail("tree without segments");
                }
                if tree.segments.iter().any(|s| s.steps.is_empty()) {
                    return fail("segment with zero steps");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Name components in wire order, without the leading slash.
    pub fn components(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(keyword) = self.command().keyword() {
            out.push(PREFIX.to_string());
            out.push(keyword.to_string());
        }
        match self {
            ServiceName::Chain { steps, .. } => push_steps(&mut out, steps),
            ServiceName::Tree { tree, .. } => {
                push_faces(&mut out, &tree.head_faces);
                out.push(tree.head.to_string());
                for segment in &tree.segments {
                    out.push(segment.label.to_string());
                    push_steps(&mut out, &segment.steps);
                }
            }
            ServiceName::Lookup { head, meta } => {
                out.push(head.to_string());
                out.push(meta.execution_time.to_string());
                out.push(meta.triggering_time.to_string());
            }
            ServiceName::Retrieve { head, requester } => {
                out.push(head.to_string());
                if let Some(requester) = requester {
                    out.push(requester.to_string());
                }
            }
            ServiceName::Monitor => {}
            ServiceName::Deploy { head } => {
                if let Some(head) = head {
                    out.push(head.to_string());
                }
            }
        }
        out
    }

    /// Element at the consumable position: the head of a tree or the first
    /// chain element. `None` for non-executable names or when faces must be
    /// crossed first.
    pub fn first_element(&self) -> Option<&Label> {
        match self {
            ServiceName::Chain { steps, .. } => steps
                .first()
                .filter(|s| s.faces.is_empty())
                .map(|s| &s.element),
            ServiceName::Tree { tree, .. } if tree.head_faces.is_empty() => Some(&tree.head),
            _ => None,
        }
    }

    /// Pops the leading face of a name that still has to be source-routed
    /// before reaching its first element.
    pub fn pop_leading_face(&self) -> Option<(FaceId, ServiceName)> {
        match self {
            ServiceName::Chain { exec, steps } => {
                let first = steps.first()?;
                let (&face, rest) = first.faces.split_first()?;
                let mut steps = steps.clone();
                steps[0].faces = rest.to_vec();
                Some((face, ServiceName::Chain { exec: *exec, steps }))
            }
            ServiceName::Tree { exec, tree } => {
                let (&face, rest) = tree.head_faces.split_first()?;
                let mut tree = tree.clone();
                tree.head_faces = rest.to_vec();
                Some((face, ServiceName::Tree { exec: *exec, tree }))
            }
            _ => None,
        }
    }

    /// Child Interests created when `local` is consumed: one per segment for
    /// a head, one for a chain with further elements, none for a terminal.
    pub fn rewrite_for_children(&self, local: &Label) -> Result<Vec<Child>, NameError> {
        if !self.is_executable() {
            return Err(NameError::NotExecutable);
        }
        if self.first_element() != Some(local) {
            return Err(NameError::ElementNotFirst(local.to_string()));
        }
        match self {
            ServiceName::Chain { steps, .. } => Ok(consume(&steps[1..]).into_iter().collect()),
            ServiceName::Tree { tree, .. } => Ok(tree
                .segments
                .iter()
                .filter_map(|segment| consume(&segment.steps))
                .collect()),
            _ => unreachable!(),
        }
    }

    /// Name of the Data that answers this name: executable names lose their
    /// command and every face token, and a tree flattens to the head followed
    /// by each segment's elements in order. Other names answer themselves.
    pub fn data_name(&self) -> ServiceName {
        match self {
            ServiceName::Chain { steps, .. } => ServiceName::chain(
                steps
                    .iter()
                    .map(|s| Step::local(s.element.clone()))
                    .collect(),
            ),
            ServiceName::Tree { tree, .. } => {
                let mut steps = vec![Step::local(tree.head.clone())];
                steps.extend(
                    tree.segments
                        .iter()
                        .flat_map(|seg| seg.steps.iter())
                        .map(|s| Step::local(s.element.clone())),
                );
                ServiceName::chain(steps)
            }
            other => other.clone(),
        }
    }

    pub fn head(&self) -> Option<&Label> {
        match self {
            ServiceName::Tree { tree, .. } => Some(&tree.head),
            ServiceName::Lookup { head, .. } | ServiceName::Retrieve { head, .. } => Some(head),
            ServiceName::Deploy { head } => head.as_ref(),
            _ => None,
        }
    }
}

fn consume(steps: &[Step]) -> Option<Child> {
    let first = steps.first()?;
    let mut rest = steps.to_vec();
    let face = match first.faces.split_first() {
        Some((&face, tail)) => {
            rest[0].faces = tail.to_vec();
            Some(face)
        }
        None => None,
    };
    Some(Child {
        face,
        name: ServiceName::chain(rest),
    })
}

fn push_faces(out: &mut Vec<String>, faces: &[FaceId]) {
    out.extend(faces.iter().map(|f| format!("face{f}")));
}

fn push_steps(out: &mut Vec<String>, steps: &[Step]) {
    for step in steps {
        push_faces(out, &step.faces);
        out.push(step.element.to_string());
    }
}

fn parse_command(text: &str, command: Command, rest: &[&str]) -> Result<ServiceName, NameError> {
    let label = |c: &str| Label::new(c).map_err(|_| NameError::malformed(text, format!("`{c}` is not a label")));
    match command {
        Command::Exec => parse_body(text, true, rest),
        Command::Lookup => match rest {
            [head, exec, trig] => {
                let number = |c: &str| {
                    c.parse::<u64>()
                        .ok()
                        .filter(|_| c.bytes().all(|b| b.is_ascii_digit()))
                        .ok_or_else(|| NameError::malformed(text, format!("`{c}` is not a number")))
                };
                Ok(ServiceName::lookup(label(head)?, number(exec)?, number(trig)?))
            }
            _ => Err(NameError::malformed(
                text,
                "lookup needs a head, an execution time and a triggering time",
            )),
        },
        Command::Retrieve => match rest {
            [head] => Ok(ServiceName::Retrieve {
                head: label(head)?,
                requester: None,
            }),
            [head, requester] => Ok(ServiceName::Retrieve {
                head: label(head)?,
                requester: Some(label(requester)?),
            }),
            _ => Err(NameError::malformed(text, "retrieve needs a head")),
        },
        Command::Monitor => match rest {
            [] => Ok(ServiceName::Monitor),
            _ => Err(NameError::malformed(text, "monitor takes no components")),
        },
        Command::Deploy => match rest {
            [] => Ok(ServiceName::Deploy { head: None }),
            [head] => Ok(ServiceName::Deploy {
                head: Some(label(head)?),
            }),
            _ => Err(NameError::malformed(text, "deploy takes at most a head")),
        },
        Command::None => parse_body(text, false, rest),
    }
}

fn parse_steps(text: &str, components: &[&str]) -> Result<Vec<Step>, NameError> {
    let mut steps = Vec::new();
    let mut faces = Vec::new();
    for &c in components {
        if let Some(face) = face_token(c) {
            faces.push(face);
        } else {
            let element = Label::new(c)
                .map_err(|_| NameError::malformed(text, format!("`{c}` is not a label")))?;
            steps.push(Step::via(std::mem::take(&mut faces), element));
        }
    }
    if !faces.is_empty() {
        return Err(NameError::malformed(text, "face token with no following element"));
    }
    Ok(steps)
}

fn parse_body(text: &str, exec: bool, components: &[&str]) -> Result<ServiceName, NameError> {
    if components.is_empty() {
        return Err(NameError::malformed(text, "no elements"));
    }
    let Some(first_segment) = components.iter().position(|c| segment_token(c).is_some()) else {
        let steps = parse_steps(text, components)?;
        return Ok(ServiceName::Chain { exec, steps });
    };

    let mut prefix = parse_steps(text, &components[..first_segment])?;
    if prefix.len() != 1 {
        return Err(NameError::malformed(text, "a tree needs exactly one head before its segments"));
    }
    let Step {
        faces: head_faces,
        element: head,
    } = prefix.remove(0);

    let mut segments = Vec::new();
    let mut start = first_segment;
    while start < components.len() {
        let label = SegmentLabel::new(components[start])?;
        let end = components[start + 1..]
            .iter()
            .position(|c| segment_token(c).is_some())
            .map_or(components.len(), |p| start + 1 + p);
        let steps = parse_steps(text, &components[start + 1..end])?;
        if steps.is_empty() {
            return Err(NameError::malformed(text, format!("segment {label} has zero steps")));
        }
        segments.push(Segment { label, steps });
        start = end;
    }
    Ok(ServiceName::Tree {
        exec,
        tree: TreeName {
            head_faces,
            head,
            segments,
        },
    })
}

impl fmt::Display for ServiceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for component in self.components() {
            write!(f, "/{component}")?;
        }
        Ok(())
    }
}

impl FromStr for ServiceName {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ServiceName::parse(s)
    }
}
