//! Depth-first action sequences over constructor trees.
//!
//! Value terminals emit no action; replay fills them with
//! [`VALUE_PLACEHOLDER`](super::VALUE_PLACEHOLDER).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::relgraph::Schema;

use super::ast::{Sql, Tree, VALUE_PLACEHOLDER};
use super::grammar::{FieldKind, GrammarSpec};
use super::SqlError;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    ApplyRule(String),
    SelectTable(usize),
    SelectColumn(usize),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::ApplyRule(c) => write!(f, "ApplyRule({c})"),
            Action::SelectTable(t) => write!(f, "SelectTable({t})"),
            Action::SelectColumn(c) => write!(f, "SelectColumn({c})"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("malformed action `{0}`")]
pub struct ActionParseError(String);

impl FromStr for Action {
    type Err = ActionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ActionParseError(s.to_string());
        let s = s.trim();
        let (head, rest) = s.split_once('(').ok_or_else(err)?;
        let arg = rest.strip_suffix(')').ok_or_else(err)?;
        match head {
            "ApplyRule" if !arg.is_empty() && arg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                Ok(Action::ApplyRule(arg.to_string()))
            }
            "SelectTable" => arg.parse().map(Action::SelectTable).map_err(|_| err()),
            "SelectColumn" => arg.parse().map(Action::SelectColumn).map_err(|_| err()),
            _ => Err(err()),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Preorder emission: the constructor first, then each field in order.
pub fn ast_to_actions(ast: &Sql) -> Vec<Action> {
    fn walk(t: &Tree, out: &mut Vec<Action>) {
        match t {
            Tree::Node { constructor, children } => {
                out.push(Action::ApplyRule(constructor.clone()));
                children.iter().for_each(|c| walk(c, out));
            }
            Tree::Table(i) => out.push(Action::SelectTable(*i)),
            Tree::Column(i) => out.push(Action::SelectColumn(*i)),
            Tree::Value(_) => {}
        }
    }
    let mut out = Vec::new();
    walk(&ast.to_tree(), &mut out);
    out
}

struct Partial<'g> {
    constructor: String,
    fields: &'g [super::grammar::Field],
    children: Vec<Tree>,
}

/// Replays `actions` against the grammar, expanding the leftmost open
/// field at each step. Errors name the earliest offending action.
pub fn actions_to_ast(actions: &[Action], grammar: &GrammarSpec, schema: &Schema) -> Result<Sql, SqlError> {
    let root = FieldKind::Type(grammar.root.clone());
    let mut stack: Vec<Partial> = Vec::new();
    let mut done: Option<Tree> = None;
    let mut next = 0;

    // Attaches a finished subtree, closing every ancestor it completes.
    fn place(stack: &mut Vec<Partial>, done: &mut Option<Tree>, mut tree: Tree) {
        loop {
            match stack.last_mut() {
                None => {
                    *done = Some(tree);
                    return;
                }
                Some(top) => {
                    top.children.push(tree);
                    if top.children.len() < top.fields.len() {
                        return;
                    }
                    let p = stack.pop().expect("non-empty");
                    tree = Tree::Node {
                        constructor: p.constructor,
                        children: p.children,
                    };
                }
            }
        }
    }

    while done.is_none() {
        let expected = match stack.last() {
            None => &root,
            Some(top) => &top.fields[top.children.len()].kind,
        };
        if *expected == FieldKind::Value {
            place(&mut stack, &mut done, Tree::Value(VALUE_PLACEHOLDER.into()));
            continue;
        }
        let Some(action) = actions.get(next) else {
            return Err(SqlError::IncompleteSequence);
        };
        let mismatch = || SqlError::FrontierMismatch {
            index: next,
            expected: expected.name().to_string(),
            found: action.to_string(),
        };
        match (expected, action) {
            (FieldKind::Type(ty), Action::ApplyRule(name)) => {
                let (def, ctor) = grammar.constructor(name).ok_or_else(mismatch)?;
                if &def.name != ty {
                    return Err(mismatch());
                }
                if ctor.fields.is_empty() {
                    place(
                        &mut stack,
                        &mut done,
                        Tree::Node {
                            constructor: name.clone(),
                            children: Vec::new(),
                        },
                    );
                } else {
                    stack.push(Partial {
                        constructor: name.clone(),
                        fields: &ctor.fields,
                        children: Vec::with_capacity(ctor.fields.len()),
                    });
                }
            }
            (FieldKind::TableRef, Action::SelectTable(t)) => {
                if *t >= schema.tables.len() {
                    return Err(SqlError::InvalidReference {
                        index: next,
                        reference: action.to_string(),
                    });
                }
                place(&mut stack, &mut done, Tree::Table(*t));
            }
            (FieldKind::ColumnRef, Action::SelectColumn(c)) => {
                if *c >= schema.columns.len() {
                    return Err(SqlError::InvalidReference {
                        index: next,
                        reference: action.to_string(),
                    });
                }
                place(&mut stack, &mut done, Tree::Column(*c));
            }
            _ => return Err(mismatch()),
        }
        next += 1;
    }
    if next < actions.len() {
        return Err(SqlError::TrailingActions { index: next });
    }
    Sql::from_tree(&done.expect("loop exits on completion"))
}
