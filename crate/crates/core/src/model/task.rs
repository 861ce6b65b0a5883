use std::fmt;

/// Which of the two dense prediction tasks a branch serves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskId {
    Element,
    Defect,
}

impl TaskId {
    pub const ALL: [TaskId; 2] = [TaskId::Element, TaskId::Defect];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::Element => "element",
            TaskId::Defect => "defect",
        }
    }

    pub fn other(self) -> TaskId {
        match self {
            TaskId::Element => TaskId::Defect,
            TaskId::Defect => TaskId::Element,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn spec(self) -> TaskSpec {
        match self {
            TaskId::Element => TaskSpec::element(),
            TaskId::Defect => TaskSpec::defect(),
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "element" => Ok(TaskId::Element),
            "defect" => Ok(TaskId::Defect),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

pub const ELEMENT_CLASSES: [&str; 7] = [
    "Bearing",
    "Bracing",
    "Deck",
    "Floor beam",
    "Girder",
    "Substructure",
    "Background",
];
pub const DEFECT_CLASSES: [&str; 2] = ["Corrosion", "Non-corrosion"];

pub const BEARING: u8 = 0;
pub const BRACING: u8 = 1;
pub const DECK: u8 = 2;
pub const FLOOR_BEAM: u8 = 3;
pub const GIRDER: u8 = 4;
pub const SUBSTRUCTURE: u8 = 5;
pub const BACKGROUND: u8 = 6;

pub const CORROSION: u8 = 0;
pub const NON_CORROSION: u8 = 1;

/// A task and its ordered class list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub classes: Vec<String>,
}

impl TaskSpec {
    pub fn element() -> Self {
        TaskSpec {
            id: TaskId::Element,
            classes: ELEMENT_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn defect() -> Self {
        TaskSpec {
            id: TaskId::Defect,
            classes: DEFECT_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.classes[class]
    }

    /// The class used to fill pixels that carry no foreground label.
    pub fn fill_class(&self) -> u8 {
        match self.id {
            TaskId::Element => BACKGROUND,
            TaskId::Defect => NON_CORROSION,
        }
    }
}
