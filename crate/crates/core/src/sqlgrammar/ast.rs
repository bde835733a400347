//! Typed SQL syntax tree and its untyped constructor-tree form.

use serde::{Deserialize, Serialize};

use super::grammar::{unit_constructor, AGGREGATES, ARITH, COMPARISONS, SET_OPS};
use super::SqlError;

/// Value filled in for literals when rebuilding a tree from actions.
pub const VALUE_PLACEHOLDER: &str = "value";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetOp {
    Intersect,
    Union,
    Except,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sql {
    pub left: Unit,
    pub compound: Option<(SetOp, Box<Unit>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub distinct: bool,
    pub select: Vec<ValUnit>,
    pub from: From,
    pub where_clause: Option<Cond>,
    pub group: Option<Group>,
    pub order: Option<Order>,
}

/// `tables[k]` joins the previous tables through `joins[k - 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct From {
    pub tables: Vec<usize>,
    pub joins: Vec<Join>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Join {
    On(usize, usize),
    Cross,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Agg {
    None,
    Max,
    Min,
    Count,
    Sum,
    Avg,
    CountDistinct,
}

impl Agg {
    const ALL: [Agg; 7] = [
        Agg::None,
        Agg::Max,
        Agg::Min,
        Agg::Count,
        Agg::Sum,
        Agg::Avg,
        Agg::CountDistinct,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColUnit {
    Column(Agg, usize),
    CountStar,
    Star,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Minus,
    Plus,
    Times,
    Divide,
}

impl ArithOp {
    const ALL: [ArithOp; 4] = [ArithOp::Minus, ArithOp::Plus, ArithOp::Times, ArithOp::Divide];

    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Minus => "-",
            ArithOp::Plus => "+",
            ArithOp::Times => "*",
            ArithOp::Divide => "/",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValUnit {
    Unary(ColUnit),
    Binary(ArithOp, ColUnit, ColUnit),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Conj {
    And,
    Or,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cond {
    pub conj: Conj,
    pub preds: Vec<Pred>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Like,
    NotLike,
}

impl CmpOp {
    const ALL: [CmpOp; 8] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Gt,
        CmpOp::Le,
        CmpOp::Ge,
        CmpOp::Like,
        CmpOp::NotLike,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Like => "LIKE",
            CmpOp::NotLike => "NOT LIKE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operand {
    Literal(String),
    Nested(Box<Sql>),
    Column(ColUnit),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pred {
    Compare { op: CmpOp, left: ValUnit, right: Operand },
    In { negated: bool, left: ValUnit, query: Box<Sql> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub columns: Vec<usize>,
    pub having: Option<Cond>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub items: Vec<ValUnit>,
    pub descending: bool,
    pub limit: Option<String>,
}

/// Untyped constructor tree; children follow the constructor's field order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tree {
    Node { constructor: String, children: Vec<Tree> },
    Table(usize),
    Column(usize),
    Value(String),
}

impl Tree {
    fn node(constructor: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree::Node {
            constructor: constructor.into(),
            children,
        }
    }

    /// The same tree with every value terminal replaced by the placeholder.
    pub fn masked(&self) -> Tree {
        match self {
            Tree::Node { constructor, children } => Tree::node(constructor.clone(), children.iter().map(Tree::masked).collect()),
            Tree::Value(_) => Tree::Value(VALUE_PLACEHOLDER.into()),
            t => t.clone(),
        }
    }

    /// Every constructor name in preorder.
    pub fn constructors(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a Tree, out: &mut Vec<&'a str>) {
            if let Tree::Node { constructor, children } = t {
                out.push(constructor);
                children.iter().for_each(|c| walk(c, out));
            }
        }
        walk(self, &mut out);
        out
    }
}

// ---- lowering ------------------------------------------------------------

fn lower_col(c: &ColUnit) -> Tree {
    match *c {
        ColUnit::Column(agg, col) => {
            let i = Agg::ALL.iter().position(|a| *a == agg).expect("listed");
            Tree::node(AGGREGATES[i], vec![Tree::Column(col)])
        }
        ColUnit::CountStar => Tree::node("CountStar", vec![]),
        ColUnit::Star => Tree::node("Star", vec![]),
    }
}

fn lower_val(v: &ValUnit) -> Tree {
    match v {
        ValUnit::Unary(c) => Tree::node("Unary", vec![lower_col(c)]),
        ValUnit::Binary(op, a, b) => {
            let i = ArithOp::ALL.iter().position(|o| o == op).expect("listed");
            Tree::node(ARITH[i], vec![lower_col(a), lower_col(b)])
        }
    }
}

fn lower_cond(c: &Cond) -> Tree {
    let preds = c.preds.iter().map(lower_pred).collect::<Vec<_>>();
    let name = match (preds.len(), c.conj) {
        (1, _) => "Cond1".to_string(),
        (k, Conj::And) => format!("And{k}"),
        (k, Conj::Or) => format!("Or{k}"),
    };
    Tree::node(name, preds)
}

fn lower_pred(p: &Pred) -> Tree {
    match p {
        Pred::Compare { op, left, right } => {
            let i = CmpOp::ALL.iter().position(|o| o == op).expect("listed");
            let value = match right {
                Operand::Literal(s) => Tree::node("Literal", vec![Tree::Value(s.clone())]),
                Operand::Nested(q) => Tree::node("Nested", vec![q.to_tree()]),
                Operand::Column(c) => Tree::node("ColumnValue", vec![lower_col(c)]),
            };
            Tree::node(COMPARISONS[i], vec![lower_val(left), value])
        }
        Pred::In { negated, left, query } => Tree::node(
            if *negated { "NotIn" } else { "In" },
            vec![lower_val(left), query.to_tree()],
        ),
    }
}

fn lower_unit(u: &Unit) -> Tree {
    let k = u.select.len();
    let select = Tree::node(
        if u.distinct { format!("SelectDistinct{k}") } else { format!("Select{k}") },
        u.select.iter().map(lower_val).collect(),
    );
    let mut from_children = vec![Tree::Table(u.from.tables[0])];
    for (t, j) in u.from.tables[1..].iter().zip(&u.from.joins) {
        from_children.push(match j {
            Join::On(a, b) => Tree::node("On", vec![Tree::Column(*a), Tree::Column(*b)]),
            Join::Cross => Tree::node("Cross", vec![]),
        });
        from_children.push(Tree::Table(*t));
    }
    let from = Tree::node(format!("From{}", u.from.tables.len()), from_children);
    let mut children = vec![select, from];
    if let Some(c) = &u.where_clause {
        children.push(lower_cond(c));
    }
    if let Some(g) = &u.group {
        let mut cols: Vec<Tree> = g.columns.iter().map(|&c| Tree::Column(c)).collect();
        let name = match &g.having {
            Some(h) => {
                cols.push(lower_cond(h));
                format!("GroupByHaving{}", g.columns.len())
            }
            None => format!("GroupBy{}", g.columns.len()),
        };
        children.push(Tree::node(name, cols));
    }
    if let Some(o) = &u.order {
        let items = Tree::node(format!("Items{}", o.items.len()), o.items.iter().map(lower_val).collect());
        let dir = if o.descending { "Desc" } else { "Asc" };
        children.push(match &o.limit {
            Some(l) => Tree::node(format!("{dir}Limit"), vec![items, Tree::Value(l.clone())]),
            None => Tree::node(dir, vec![items]),
        });
    }
    Tree::node(
        unit_constructor(u.where_clause.is_some(), u.group.is_some(), u.order.is_some()),
        children,
    )
}

// ---- raising -------------------------------------------------------------

fn bad(what: &str, t: &Tree) -> SqlError {
    SqlError::MalformedTree(format!("expected {what}, found {t:?}"))
}

fn node<'a>(t: &'a Tree, what: &str) -> Result<(&'a str, &'a [Tree]), SqlError> {
    match t {
        Tree::Node { constructor, children } => Ok((constructor, children)),
        _ => Err(bad(what, t)),
    }
}

fn arity(children: &[Tree], n: usize, name: &str) -> Result<(), SqlError> {
    if children.len() != n {
        return Err(SqlError::MalformedTree(format!(
            "{name} needs {n} children, found {}",
            children.len()
        )));
    }
    Ok(())
}

/// Parses the trailing count of names like `Select3`.
fn counted(name: &str, prefix: &str) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok().filter(|&k: &usize| k > 0)
}

fn column(t: &Tree) -> Result<usize, SqlError> {
    match t {
        Tree::Column(c) => Ok(*c),
        _ => Err(bad("column reference", t)),
    }
}

fn value(t: &Tree) -> Result<String, SqlError> {
    match t {
        Tree::Value(v) => Ok(v.clone()),
        _ => Err(bad("value", t)),
    }
}

fn raise_col(t: &Tree) -> Result<ColUnit, SqlError> {
    let (name, ch) = node(t, "col_unit")?;
    if let Some(i) = AGGREGATES.iter().position(|a| *a == name) {
        arity(ch, 1, name)?;
        return Ok(ColUnit::Column(Agg::ALL[i], column(&ch[0])?));
    }
    arity(ch, 0, name)?;
    match name {
        "CountStar" => Ok(ColUnit::CountStar),
        "Star" => Ok(ColUnit::Star),
        _ => Err(bad("col_unit", t)),
    }
}

fn raise_val(t: &Tree) -> Result<ValUnit, SqlError> {
    let (name, ch) = node(t, "val_unit")?;
    if name == "Unary" {
        arity(ch, 1, name)?;
        return Ok(ValUnit::Unary(raise_col(&ch[0])?));
    }
    let i = ARITH.iter().position(|a| *a == name).ok_or_else(|| bad("val_unit", t))?;
    arity(ch, 2, name)?;
    Ok(ValUnit::Binary(ArithOp::ALL[i], raise_col(&ch[0])?, raise_col(&ch[1])?))
}

fn raise_cond(t: &Tree) -> Result<Cond, SqlError> {
    let (name, ch) = node(t, "cond")?;
    let (conj, k) = if name == "Cond1" {
        (Conj::And, 1)
    } else if let Some(k) = counted(name, "And").filter(|&k| k >= 2) {
        (Conj::And, k)
    } else if let Some(k) = counted(name, "Or").filter(|&k| k >= 2) {
        (Conj::Or, k)
    } else {
        return Err(bad("cond", t));
    };
    arity(ch, k, name)?;
    Ok(Cond {
        conj,
        preds: ch.iter().map(raise_pred).collect::<Result<_, _>>()?,
    })
}

fn raise_pred(t: &Tree) -> Result<Pred, SqlError> {
    let (name, ch) = node(t, "pred")?;
    arity(ch, 2, name)?;
    let left = raise_val(&ch[0])?;
    if name == "In" || name == "NotIn" {
        return Ok(Pred::In {
            negated: name == "NotIn",
            left,
            query: Box::new(Sql::from_tree(&ch[1])?),
        });
    }
    let i = COMPARISONS.iter().position(|c| *c == name).ok_or_else(|| bad("pred", t))?;
    let (vname, vch) = node(&ch[1], "value")?;
    arity(vch, 1, vname)?;
    let right = match vname {
        "Literal" => Operand::Literal(value(&vch[0])?),
        "Nested" => Operand::Nested(Box::new(Sql::from_tree(&vch[0])?)),
        "ColumnValue" => Operand::Column(raise_col(&vch[0])?),
        _ => return Err(bad("value", &ch[1])),
    };
    Ok(Pred::Compare {
        op: CmpOp::ALL[i],
        left,
        right,
    })
}

fn raise_unit(t: &Tree) -> Result<Unit, SqlError> {
    let (name, ch) = node(t, "unit")?;
    let rest = name.strip_prefix("SelectFrom").ok_or_else(|| bad("unit", t))?;
    let has_where = rest.contains("Where");
    let has_group = rest.contains("Group");
    let has_order = rest.contains("Order");
    if unit_constructor(has_where, has_group, has_order) != name {
        return Err(bad("unit", t));
    }
    arity(ch, 2 + has_where as usize + has_group as usize + has_order as usize, name)?;

    let (sname, sch) = node(&ch[0], "select")?;
    let (distinct, k) = match counted(sname, "SelectDistinct") {
        Some(k) => (true, k),
        None => (false, counted(sname, "Select").ok_or_else(|| bad("select", &ch[0]))?),
    };
    arity(sch, k, sname)?;
    let select = sch.iter().map(raise_val).collect::<Result<_, _>>()?;

    let (fname, fch) = node(&ch[1], "from")?;
    let k = counted(fname, "From").ok_or_else(|| bad("from", &ch[1]))?;
    arity(fch, 2 * k - 1, fname)?;
    let mut tables = vec![table(&fch[0])?];
    let mut joins = Vec::new();
    for pair in fch[1..].chunks(2) {
        let (jname, jch) = node(&pair[0], "join")?;
        joins.push(match jname {
            "On" => {
                arity(jch, 2, jname)?;
                Join::On(column(&jch[0])?, column(&jch[1])?)
            }
            "Cross" => {
                arity(jch, 0, jname)?;
                Join::Cross
            }
            _ => return Err(bad("join", &pair[0])),
        });
        tables.push(table(&pair[1])?);
    }

    let mut next = 2;
    let where_clause = if has_where {
        next += 1;
        Some(raise_cond(&ch[next - 1])?)
    } else {
        None
    };
    let group = if has_group {
        next += 1;
        let g = &ch[next - 1];
        let (gname, gch) = node(g, "group")?;
        let (k, having) = match counted(gname, "GroupByHaving") {
            Some(k) => (k, true),
            None => (counted(gname, "GroupBy").ok_or_else(|| bad("group", g))?, false),
        };
        arity(gch, k + having as usize, gname)?;
        Some(Group {
            columns: gch[..k].iter().map(column).collect::<Result<_, _>>()?,
            having: if having { Some(raise_cond(&gch[k])?) } else { None },
        })
    } else {
        None
    };
    let order = if has_order {
        let o = &ch[next];
        let (oname, och) = node(o, "order")?;
        let (descending, limited) = match oname {
            "Asc" => (false, false),
            "Desc" => (true, false),
            "AscLimit" => (false, true),
            "DescLimit" => (true, true),
            _ => return Err(bad("order", o)),
        };
        arity(och, 1 + limited as usize, oname)?;
        let (lname, lch) = node(&och[0], "order_list")?;
        let k = counted(lname, "Items").ok_or_else(|| bad("order_list", &och[0]))?;
        arity(lch, k, lname)?;
        Some(Order {
            items: lch.iter().map(raise_val).collect::<Result<_, _>>()?,
            descending,
            limit: if limited { Some(value(&och[1])?) } else { None },
        })
    } else {
        None
    };
    Ok(Unit {
        distinct,
        select,
        from: From { tables, joins },
        where_clause,
        group,
        order,
    })
}

fn table(t: &Tree) -> Result<usize, SqlError> {
    match t {
        Tree::Table(i) => Ok(*i),
        _ => Err(bad("table reference", t)),
    }
}

impl Sql {
    pub fn to_tree(&self) -> Tree {
        match &self.compound {
            None => Tree::node("Single", vec![lower_unit(&self.left)]),
            Some((op, right)) => {
                let name = SET_OPS[*op as usize];
                Tree::node(name, vec![lower_unit(&self.left), lower_unit(right)])
            }
        }
    }

    pub fn from_tree(t: &Tree) -> Result<Sql, SqlError> {
        let (name, ch) = node(t, "sql")?;
        if name == "Single" {
            arity(ch, 1, name)?;
            return Ok(Sql {
                left: raise_unit(&ch[0])?,
                compound: None,
            });
        }
        let op = match name {
            "Intersect" => SetOp::Intersect,
            "Union" => SetOp::Union,
            "Except" => SetOp::Except,
            _ => return Err(bad("sql", t)),
        };
        arity(ch, 2, name)?;
        Ok(Sql {
            left: raise_unit(&ch[0])?,
            compound: Some((op, Box::new(raise_unit(&ch[1])?))),
        })
    }

    pub fn units(&self) -> impl Iterator<Item = &Unit> {
        std::iter::once(&self.left).chain(self.compound.as_ref().map(|(_, u)| &**u))
    }

    /// Every table and column index referenced anywhere, nested queries
    /// included. Tables count only where they appear in a FROM clause.
    pub fn references(&self) -> (Vec<usize>, Vec<usize>) {
        let mut tables = Vec::new();
        let mut columns = Vec::new();
        fn walk(t: &Tree, tables: &mut Vec<usize>, columns: &mut Vec<usize>) {
            match t {
                Tree::Node { children, .. } => children.iter().for_each(|c| walk(c, tables, columns)),
                Tree::Table(i) => tables.push(*i),
                Tree::Column(i) => columns.push(*i),
                Tree::Value(_) => {}
            }
        }
        walk(&self.to_tree(), &mut tables, &mut columns);
        tables.sort_unstable();
        tables.dedup();
        columns.sort_unstable();
        columns.dedup();
        (tables, columns)
    }
}

impl Sql {
    /// The same query with every literal replaced by the placeholder, which
    /// is what an action-sequence round trip preserves.
    pub fn masked(&self) -> Sql {
        Sql::from_tree(&self.to_tree().masked()).expect("masking keeps the tree shape")
    }
}
