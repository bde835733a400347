//! The constructor grammar: typed nonterminals with fixed-arity productions.
//!
//! There are no optional fields. Optional clauses and list lengths are
//! enumerated as separate constructors, so a decoder commits to a shape
//! before emitting any of its parts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// What fills a field: a nonterminal or a terminal kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Type(String),
    TableRef,
    ColumnRef,
    Value,
}

impl FieldKind {
    pub fn name(&self) -> &str {
        match self {
            FieldKind::Type(t) => t,
            FieldKind::TableRef => "TableRef",
            FieldKind::ColumnRef => "ColumnRef",
            FieldKind::Value => "Value",
        }
    }

    fn parse(s: &str) -> FieldKind {
        match s {
            "TableRef" => FieldKind::TableRef,
            "ColumnRef" => FieldKind::ColumnRef,
            "Value" => FieldKind::Value,
            t => FieldKind::Type(t.to_string()),
        }
    }
}

impl Serialize for FieldKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for FieldKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(FieldKind::parse(&String::deserialize(d)?))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub kind: FieldKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constructor {
    pub name: String,
    pub fields: Vec<Field>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDef {
    pub name: String,
    pub constructors: Vec<Constructor>,
}

/// Caps on list-valued clauses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArityLimits {
    pub select: usize,
    pub from: usize,
    pub conditions: usize,
    pub group_by: usize,
    pub order_by: usize,
}

impl Default for ArityLimits {
    fn default() -> Self {
        ArityLimits {
            select: 6,
            from: 4,
            conditions: 4,
            group_by: 2,
            order_by: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarSpec {
    pub root: String,
    pub limits: ArityLimits,
    pub types: Vec<TypeDef>,
    #[serde(skip)]
    lookup: HashMap<String, (usize, usize)>,
}

pub const AGGREGATES: [&str; 7] = ["NoAgg", "Max", "Min", "Count", "Sum", "Avg", "CountDistinct"];
pub const ARITH: [&str; 4] = ["Minus", "Plus", "Times", "Divide"];
pub const COMPARISONS: [&str; 8] = ["Eq", "Ne", "Lt", "Gt", "Le", "Ge", "Like", "NotLike"];
pub const SET_OPS: [&str; 3] = ["Intersect", "Union", "Except"];

fn f(name: &str, kind: FieldKind) -> Field {
    Field {
        name: name.to_string(),
        kind,
    }
}

fn ty(name: &str) -> FieldKind {
    FieldKind::Type(name.to_string())
}

fn ctor(name: impl Into<String>, fields: Vec<Field>) -> Constructor {
    Constructor {
        name: name.into(),
        fields,
    }
}

fn repeated(field: &str, kind: &FieldKind, n: usize) -> Vec<Field> {
    (1..=n).map(|i| f(&format!("{field}{i}"), kind.clone())).collect()
}

/// Constructor name of a unit with the given optional clauses present.
pub fn unit_constructor(has_where: bool, has_group: bool, has_order: bool) -> String {
    let mut s = String::from("SelectFrom");
    if has_where {
        s.push_str("Where");
    }
    if has_group {
        s.push_str("Group");
    }
    if has_order {
        s.push_str("Order");
    }
    s
}

impl GrammarSpec {
    pub fn new(limits: ArityLimits) -> GrammarSpec {
        let mut types = Vec::new();

        let mut sql = vec![ctor("Single", vec![f("unit", ty("unit"))])];
        for op in SET_OPS {
            sql.push(ctor(op, vec![f("left", ty("unit")), f("right", ty("unit"))]));
        }
        types.push(TypeDef {
            name: "sql".into(),
            constructors: sql,
        });

        let mut unit = Vec::new();
        for w in [false, true] {
            for g in [false, true] {
                for o in [false, true] {
                    let mut fields = vec![f("select", ty("select")), f("from", ty("from"))];
                    if w {
                        fields.push(f("where", ty("cond")));
                    }
                    if g {
                        fields.push(f("group", ty("group")));
                    }
                    if o {
                        fields.push(f("order", ty("order")));
                    }
                    unit.push(ctor(unit_constructor(w, g, o), fields));
                }
            }
        }
        types.push(TypeDef {
            name: "unit".into(),
            constructors: unit,
        });

        let mut select = Vec::new();
        for distinct in [false, true] {
            for k in 1..=limits.select {
                let name = if distinct { format!("SelectDistinct{k}") } else { format!("Select{k}") };
                select.push(ctor(name, repeated("item", &ty("val_unit"), k)));
            }
        }
        types.push(TypeDef {
            name: "select".into(),
            constructors: select,
        });

        let mut val_unit = vec![ctor("Unary", vec![f("col", ty("col_unit"))])];
        for op in ARITH {
            val_unit.push(ctor(op, vec![f("left", ty("col_unit")), f("right", ty("col_unit"))]));
        }
        types.push(TypeDef {
            name: "val_unit".into(),
            constructors: val_unit,
        });

        let mut col_unit: Vec<Constructor> = AGGREGATES
            .iter()
            .map(|a| ctor(*a, vec![f("column", FieldKind::ColumnRef)]))
            .collect();
        col_unit.push(ctor("CountStar", vec![]));
        col_unit.push(ctor("Star", vec![]));
        types.push(TypeDef {
            name: "col_unit".into(),
            constructors: col_unit,
        });

        let mut from = Vec::new();
        for k in 1..=limits.from {
            let mut fields = vec![f("table1", FieldKind::TableRef)];
            for i in 2..=k {
                fields.push(f(&format!("join{i}"), ty("join")));
                fields.push(f(&format!("table{i}"), FieldKind::TableRef));
            }
            from.push(ctor(format!("From{k}"), fields));
        }
        types.push(TypeDef {
            name: "from".into(),
            constructors: from,
        });
        types.push(TypeDef {
            name: "join".into(),
            constructors: vec![
                ctor("On", vec![f("left", FieldKind::ColumnRef), f("right", FieldKind::ColumnRef)]),
                ctor("Cross", vec![]),
            ],
        });

        let mut cond = vec![ctor("Cond1", vec![f("pred1", ty("pred"))])];
        for conj in ["And", "Or"] {
            for k in 2..=limits.conditions.max(1) {
                cond.push(ctor(format!("{conj}{k}"), repeated("pred", &ty("pred"), k)));
            }
        }
        types.push(TypeDef {
            name: "cond".into(),
            constructors: cond,
        });

        let mut pred: Vec<Constructor> = COMPARISONS
            .iter()
            .map(|c| ctor(*c, vec![f("left", ty("val_unit")), f("right", ty("value"))]))
            .collect();
        for c in ["In", "NotIn"] {
            pred.push(ctor(c, vec![f("left", ty("val_unit")), f("query", ty("sql"))]));
        }
        types.push(TypeDef {
            name: "pred".into(),
            constructors: pred,
        });
        types.push(TypeDef {
            name: "value".into(),
            constructors: vec![
                ctor("Literal", vec![f("value", FieldKind::Value)]),
                ctor("Nested", vec![f("query", ty("sql"))]),
                ctor("ColumnValue", vec![f("col", ty("col_unit"))]),
            ],
        });

        let mut group = Vec::new();
        for having in [false, true] {
            for k in 1..=limits.group_by {
                let mut fields = repeated("column", &FieldKind::ColumnRef, k);
                let name = if having {
                    fields.push(f("having", ty("cond")));
                    format!("GroupByHaving{k}")
                } else {
                    format!("GroupBy{k}")
                };
                group.push(ctor(name, fields));
            }
        }
        types.push(TypeDef {
            name: "group".into(),
            constructors: group,
        });

        let mut order = Vec::new();
        for dir in ["Asc", "Desc"] {
            order.push(ctor(dir, vec![f("items", ty("order_list"))]));
        }
        for dir in ["Asc", "Desc"] {
            order.push(ctor(
                format!("{dir}Limit"),
                vec![f("items", ty("order_list")), f("limit", FieldKind::Value)],
            ));
        }
        types.push(TypeDef {
            name: "order".into(),
            constructors: order,
        });
        types.push(TypeDef {
            name: "order_list".into(),
            constructors: (1..=limits.order_by)
                .map(|k| ctor(format!("Items{k}"), repeated("item", &ty("val_unit"), k)))
                .collect(),
        });

        let mut g = GrammarSpec {
            root: "sql".into(),
            limits,
            types,
            lookup: HashMap::new(),
        };
        g.reindex();
        g
    }

    fn reindex(&mut self) {
        self.lookup = self
            .types
            .iter()
            .enumerate()
            .flat_map(|(ti, t)| {
                t.constructors
                    .iter()
                    .enumerate()
                    .map(move |(ci, c)| (c.name.clone(), (ti, ci)))
            })
            .collect();
    }

    pub fn from_json(text: &str) -> Result<GrammarSpec, serde_json::Error> {
        let mut g: GrammarSpec = serde_json::from_str(text)?;
        g.reindex();
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grammar serializes")
    }

    /// The constructor named `name` and the type it produces.
    pub fn constructor(&self, name: &str) -> Option<(&TypeDef, &Constructor)> {
        let &(t, c) = self.lookup.get(name)?;
        let ty = &self.types[t];
        Some((ty, &ty.constructors[c]))
    }

    pub fn type_def(&self, name: &str) -> Option<&TypeDef> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn constructor_names(&self) -> impl Iterator<Item = &str> {
        self.types
            .iter()
            .flat_map(|t| t.constructors.iter().map(|c| c.name.as_str()))
    }

    /// Structural problems: duplicate names, undeclared field types,
    /// types unreachable from the root.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for name in self.constructor_names() {
            if !seen.insert(name) {
                out.push(format!("duplicate constructor {name}"));
            }
        }
        let declared: std::collections::HashSet<&str> = self.types.iter().map(|t| t.name.as_str()).collect();
        for t in &self.types {
            if t.constructors.is_empty() {
                out.push(format!("type {} has no constructors", t.name));
            }
            for c in &t.constructors {
                for field in &c.fields {
                    if let FieldKind::Type(name) = &field.kind {
                        if !declared.contains(name.as_str()) {
                            out.push(format!("{}.{} uses undeclared type {name}", c.name, field.name));
                        }
                    }
                }
            }
        }
        let mut reached = std::collections::HashSet::from([self.root.as_str()]);
        let mut stack = vec![self.root.as_str()];
        while let Some(t) = stack.pop() {
            for c in self.type_def(t).map(|t| t.constructors.as_slice()).unwrap_or_default() {
                for field in &c.fields {
                    if let FieldKind::Type(name) = &field.kind {
                        if reached.insert(name.as_str()) {
                            stack.push(name.as_str());
                        }
                    }
                }
            }
        }
        for t in &self.types {
            if !reached.contains(t.name.as_str()) {
                out.push(format!("type {} unreachable from {}", t.name, self.root));
            }
        }
        out
    }
}

impl Default for GrammarSpec {
    fn default() -> Self {
        GrammarSpec::new(ArityLimits::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grammar_is_well_formed() {
        let g = GrammarSpec::default();
        assert!(g.violations().is_empty(), "{:?}", g.violations());
        assert!(g.constructor("Select6").is_some());
        assert!(g.constructor("Select7").is_none());
        assert!(g.constructor("From4").is_some());
        assert!(g.constructor("Or4").is_some());
        let (t, c) = g.constructor("From3").unwrap();
        assert_eq!(t.name, "from");
        let names: Vec<&str> = c.fields.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["table1", "join2", "table2", "join3", "table3"]);
    }

    #[test]
    fn json_round_trip() {
        let g = GrammarSpec::new(ArityLimits {
            select: 2,
            ..ArityLimits::default()
        });
        let back = GrammarSpec::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert!(back.constructor("Select2").is_some());
    }
}
