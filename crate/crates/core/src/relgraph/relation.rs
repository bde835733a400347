use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Node kinds of the heterogeneous question/schema graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    Question,
    Table,
    Column,
}

impl NodeType {
    pub fn short(self) -> char {
        match self {
            NodeType::Question => 'Q',
            NodeType::Table => 'T',
            NodeType::Column => 'C',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Locality {
    Local,
    NonLocal,
}

use Locality::{Local, NonLocal};
use NodeType::{Column as C, Question as Q, Table as T};

macro_rules! relation_types {
    ($($variant:ident => ($name:literal, $src:ident, $dst:ident, $loc:ident, $rev:ident)),+ $(,)?) => {
        /// Every relation tag that can label an ordered node pair.
        ///
        /// Local tags come first; `RelationType::ALL[..LOCAL_COUNT]` are the
        /// local ones and the remainder are non-local.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum RelationType {
            $($variant),+
        }

        impl RelationType {
            pub const ALL: &'static [RelationType] = &[$(RelationType::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $(RelationType::$variant => $name),+
                }
            }

            pub fn endpoints(self) -> (NodeType, NodeType) {
                match self {
                    $(RelationType::$variant => ($src, $dst)),+
                }
            }

            pub fn locality(self) -> Locality {
                match self {
                    $(RelationType::$variant => $loc),+
                }
            }

            /// The tag of the opposite direction.
            pub fn reverse(self) -> RelationType {
                match self {
                    $(RelationType::$variant => RelationType::$rev),+
                }
            }

            pub fn from_name(name: &str) -> Option<RelationType> {
                match name {
                    $($name => Some(RelationType::$variant),)+
                    _ => None,
                }
            }
        }
    };
}

relation_types! {
    QqDistPlus1 => ("QQ-Dist+1", Q, Q, Local, QqDistMinus1),
    QqDistMinus1 => ("QQ-Dist-1", Q, Q, Local, QqDistPlus1),
    CcForeignKey => ("CC-ForeignKey", C, C, Local, CcForeignKeyRev),
    CcForeignKeyRev => ("CC-ForeignKeyRev", C, C, Local, CcForeignKey),
    TcHas => ("TC-Has", T, C, Local, CtBelongsTo),
    CtBelongsTo => ("CT-BelongsTo", C, T, Local, TcHas),
    TcPrimaryKey => ("TC-PrimaryKey", T, C, Local, CtPrimaryKeyRev),
    CtPrimaryKeyRev => ("CT-PrimaryKeyRev", C, T, Local, TcPrimaryKey),
    QtNoMatch => ("QT-NoMatch", Q, T, Local, TqNoMatch),
    QtPartialMatch => ("QT-PartialMatch", Q, T, Local, TqPartialMatch),
    QtExactMatch => ("QT-ExactMatch", Q, T, Local, TqExactMatch),
    TqNoMatch => ("TQ-NoMatch", T, Q, Local, QtNoMatch),
    TqPartialMatch => ("TQ-PartialMatch", T, Q, Local, QtPartialMatch),
    TqExactMatch => ("TQ-ExactMatch", T, Q, Local, QtExactMatch),
    QcNoMatch => ("QC-NoMatch", Q, C, Local, CqNoMatch),
    QcPartialMatch => ("QC-PartialMatch", Q, C, Local, CqPartialMatch),
    QcExactMatch => ("QC-ExactMatch", Q, C, Local, CqExactMatch),
    QcValueMatch => ("QC-ValueMatch", Q, C, Local, CqValueMatch),
    CqNoMatch => ("CQ-NoMatch", C, Q, Local, QcNoMatch),
    CqPartialMatch => ("CQ-PartialMatch", C, Q, Local, QcPartialMatch),
    CqExactMatch => ("CQ-ExactMatch", C, Q, Local, QcExactMatch),
    CqValueMatch => ("CQ-ValueMatch", C, Q, Local, QcValueMatch),
    CcSameTable => ("CC-SameTable", C, C, NonLocal, CcSameTable),
    TtForeignKey => ("TT-ForeignKey", T, T, NonLocal, TtForeignKeyRev),
    TtForeignKeyRev => ("TT-ForeignKeyRev", T, T, NonLocal, TtForeignKey),
    TtForeignKeyBoth => ("TT-ForeignKeyBoth", T, T, NonLocal, TtForeignKeyBoth),
    QqIdentity => ("QQ-Identity", Q, Q, NonLocal, QqIdentity),
    TtIdentity => ("TT-Identity", T, T, NonLocal, TtIdentity),
    CcIdentity => ("CC-Identity", C, C, NonLocal, CcIdentity),
    QqDistFar => ("QQ-DistFar", Q, Q, NonLocal, QqDistFar),
    QqDefault => ("QQ-Default", Q, Q, NonLocal, QqDefault),
    QtDefault => ("QT-Default", Q, T, NonLocal, TqDefault),
    QcDefault => ("QC-Default", Q, C, NonLocal, CqDefault),
    TqDefault => ("TQ-Default", T, Q, NonLocal, QtDefault),
    TtDefault => ("TT-Default", T, T, NonLocal, TtDefault),
    TcDefault => ("TC-Default", T, C, NonLocal, CtDefault),
    CqDefault => ("CQ-Default", C, Q, NonLocal, QcDefault),
    CtDefault => ("CT-Default", C, T, NonLocal, TcDefault),
    CcDefault => ("CC-Default", C, C, NonLocal, CcDefault),
}

impl RelationType {
    pub const LOCAL_COUNT: usize = 22;
    pub const NONLOCAL_COUNT: usize = RelationType::ALL.len() - RelationType::LOCAL_COUNT;

    pub fn is_local(self) -> bool {
        self.locality() == Local
    }

    /// NoMatch / PartialMatch / ExactMatch / ValueMatch in either direction.
    pub fn is_match_series(self) -> bool {
        use RelationType::*;
        matches!(
            self,
            QtNoMatch
                | QtPartialMatch
                | QtExactMatch
                | TqNoMatch
                | TqPartialMatch
                | TqExactMatch
                | QcNoMatch
                | QcPartialMatch
                | QcExactMatch
                | QcValueMatch
                | CqNoMatch
                | CqPartialMatch
                | CqExactMatch
                | CqValueMatch
        )
    }

    pub fn is_default(self) -> bool {
        self.name().ends_with("-Default")
    }

    /// Row of this tag in the local relation embedding table.
    pub fn local_index(self) -> Option<usize> {
        self.is_local().then_some(self as usize)
    }

    /// Row of this tag in the non-local relation embedding table.
    pub fn nonlocal_index(self) -> Option<usize> {
        (!self.is_local()).then(|| self as usize - RelationType::LOCAL_COUNT)
    }

    pub fn identity_for(node_type: NodeType) -> RelationType {
        match node_type {
            Q => RelationType::QqIdentity,
            T => RelationType::TtIdentity,
            C => RelationType::CcIdentity,
        }
    }

    pub fn default_for(src: NodeType, dst: NodeType) -> RelationType {
        use RelationType::*;
        match (src, dst) {
            (Q, Q) => QqDefault,
            (Q, T) => QtDefault,
            (Q, C) => QcDefault,
            (T, Q) => TqDefault,
            (T, T) => TtDefault,
            (T, C) => TcDefault,
            (C, Q) => CqDefault,
            (C, T) => CtDefault,
            (C, C) => CcDefault,
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for RelationType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RelationType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        RelationType::from_name(&name)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown relation tag `{name}`")))
    }
}
