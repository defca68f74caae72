//! Closed enumerations describing benchmark and training examples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! closed_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} `{}` (expected one of: {})",
                        stringify!($name),
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

closed_enum!(
    /// How an instruction refers to its span.
    Category {
        Semantic => "semantic",
        Positional => "positional",
        Visual => "visual",
        Lexical => "lexical",
        Compositional => "compositional",
    }
);

closed_enum!(
    Granularity {
        Sentence => "sentence",
        MultiSentence => "multi_sentence",
        Paragraph => "paragraph",
        MultiParagraph => "multi_paragraph",
        MultiWords => "multi_words",
    }
);

closed_enum!(
    /// Whether the instruction names the drag action or only implies it.
    Form {
        Explicit => "explicit",
        Implicit => "implicit",
    }
);

closed_enum!(
    /// Scope of the screenshot.
    InterfaceLevel {
        Document => "document",
        Application => "application",
        Desktop => "desktop",
    }
);

closed_enum!(
    Density {
        Sparse => "sparse",
        Dense => "dense",
    }
);

closed_enum!(
    Application {
        Pdf => "pdf",
        Pptx => "pptx",
        Docx => "docx",
    }
);

closed_enum!(
    /// Metadata dimension a report can be broken down by.
    GroupKey {
        InterfaceLevel => "interface_level",
        Density => "density",
        Category => "category",
        Granularity => "granularity",
        Form => "form",
        Application => "application",
    }
);

impl Density {
    /// Column label used in report tables.
    pub fn label(&self) -> &'static str {
        match self {
            Density::Sparse => "Text-Sparse",
            Density::Dense => "Text-Dense",
        }
    }
}

/// The metadata an evaluated example carries for grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExampleMeta {
    pub interface_level: InterfaceLevel,
    pub density: Density,
    pub category: Category,
    pub granularity: Granularity,
    pub form: Form,
    pub application: Application,
}

impl ExampleMeta {
    pub fn value_of(&self, key: GroupKey) -> &'static str {
        match key {
            GroupKey::InterfaceLevel => self.interface_level.as_str(),
            GroupKey::Density => self.density.as_str(),
            GroupKey::Category => self.category.as_str(),
            GroupKey::Granularity => self.granularity.as_str(),
            GroupKey::Form => self.form.as_str(),
            GroupKey::Application => self.application.as_str(),
        }
    }
}

impl GroupKey {
    /// Every value the key can take, in declaration order.
    pub fn values(&self) -> Vec<&'static str> {
        fn names<T: Copy>(all: &[T], f: fn(&T) -> &'static str) -> Vec<&'static str> {
            all.iter().map(f).collect()
        }
        match self {
            GroupKey::InterfaceLevel => names(InterfaceLevel::ALL, InterfaceLevel::as_str),
            GroupKey::Density => names(Density::ALL, Density::as_str),
            GroupKey::Category => names(Category::ALL, Category::as_str),
            GroupKey::Granularity => names(Granularity::ALL, Granularity::as_str),
            GroupKey::Form => names(Form::ALL, Form::as_str),
            GroupKey::Application => names(Application::ALL, Application::as_str),
        }
    }
}
