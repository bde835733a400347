//! Canonical SQL text: uppercase keywords, single spaces, no aliases.
//!
//! A column is written `table.column` when its table is not in the unit's
//! own FROM list or when another table of that list has a column of the
//! same name; otherwise the bare name is used.

use crate::relgraph::Schema;

use super::ast::{Agg, ColUnit, Cond, Conj, Join, Operand, Pred, SetOp, Sql, Unit, ValUnit};

/// Out-of-range indices render as `#i` so that printing never panics.
pub fn render_sql(ast: &Sql, schema: &Schema) -> String {
    let mut out = String::new();
    Renderer { schema }.sql(ast, &mut out);
    out
}

struct Renderer<'a> {
    schema: &'a Schema,
}

impl Renderer<'_> {
    fn table(&self, t: usize) -> String {
        self.schema
            .tables
            .get(t)
            .map_or_else(|| format!("#{t}"), |t| t.identifier())
    }

    fn column(&self, c: usize, from: &[usize]) -> String {
        let Some(col) = self.schema.columns.get(c) else {
            return format!("#{c}");
        };
        let name = col.identifier();
        let sharing = from
            .iter()
            .filter(|&&t| {
                self.schema
                    .columns
                    .iter()
                    .any(|o| o.owner_table == t && o.identifier() == name)
            })
            .count();
        if !from.contains(&col.owner_table) || sharing >= 2 {
            format!("{}.{name}", self.table(col.owner_table))
        } else {
            name
        }
    }

    fn sql(&self, q: &Sql, out: &mut String) {
        self.unit(&q.left, out);
        if let Some((op, right)) = &q.compound {
            out.push_str(match op {
                SetOp::Intersect => " INTERSECT ",
                SetOp::Union => " UNION ",
                SetOp::Except => " EXCEPT ",
            });
            self.unit(right, out);
        }
    }

    fn col_unit(&self, c: &ColUnit, from: &[usize], out: &mut String) {
        match *c {
            ColUnit::Star => out.push('*'),
            ColUnit::CountStar => out.push_str("COUNT(*)"),
            ColUnit::Column(agg, col) => {
                let name = self.column(col, from);
                let wrapped = match agg {
                    Agg::None => name,
                    Agg::Max => format!("MAX({name})"),
                    Agg::Min => format!("MIN({name})"),
                    Agg::Count => format!("COUNT({name})"),
                    Agg::Sum => format!("SUM({name})"),
                    Agg::Avg => format!("AVG({name})"),
                    Agg::CountDistinct => format!("COUNT(DISTINCT {name})"),
                };
                out.push_str(&wrapped);
            }
        }
    }

    fn val_unit(&self, v: &ValUnit, from: &[usize], out: &mut String) {
        match v {
            ValUnit::Unary(c) => self.col_unit(c, from, out),
            ValUnit::Binary(op, a, b) => {
                self.col_unit(a, from, out);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                self.col_unit(b, from, out);
            }
        }
    }

    fn list<T>(&self, items: &[T], out: &mut String, mut f: impl FnMut(&T, &mut String)) {
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            f(item, out);
        }
    }

    fn cond(&self, c: &Cond, from: &[usize], out: &mut String) {
        for (i, p) in c.preds.iter().enumerate() {
            if i > 0 {
                out.push_str(match c.conj {
                    Conj::And => " AND ",
                    Conj::Or => " OR ",
                });
            }
            self.pred(p, from, out);
        }
    }

    fn nested(&self, q: &Sql, out: &mut String) {
        out.push('(');
        self.sql(q, out);
        out.push(')');
    }

    fn pred(&self, p: &Pred, from: &[usize], out: &mut String) {
        match p {
            Pred::Compare { op, left, right } => {
                self.val_unit(left, from, out);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                match right {
                    Operand::Literal(v) => out.push_str(v),
                    Operand::Nested(q) => self.nested(q, out),
                    Operand::Column(c) => self.col_unit(c, from, out),
                }
            }
            Pred::In { negated, left, query } => {
                self.val_unit(left, from, out);
                out.push_str(if *negated { " NOT IN " } else { " IN " });
                self.nested(query, out);
            }
        }
    }

    fn unit(&self, u: &Unit, out: &mut String) {
        let from = u.from.tables.as_slice();
        out.push_str(if u.distinct { "SELECT DISTINCT " } else { "SELECT " });
        self.list(&u.select, out, |v, out| self.val_unit(v, from, out));

        out.push_str(" FROM ");
        out.push_str(&self.table(from[0]));
        for (t, j) in from[1..].iter().zip(&u.from.joins) {
            out.push_str(" JOIN ");
            out.push_str(&self.table(*t));
            if let Join::On(a, b) = j {
                out.push_str(" ON ");
                out.push_str(&self.column(*a, from));
                out.push_str(" = ");
                out.push_str(&self.column(*b, from));
            }
        }

        if let Some(c) = &u.where_clause {
            out.push_str(" WHERE ");
            self.cond(c, from, out);
        }
        if let Some(g) = &u.group {
            out.push_str(" GROUP BY ");
            self.list(&g.columns, out, |c, out| out.push_str(&self.column(*c, from)));
            if let Some(h) = &g.having {
                out.push_str(" HAVING ");
                self.cond(h, from, out);
            }
        }
        if let Some(o) = &u.order {
            out.push_str(" ORDER BY ");
            self.list(&o.items, out, |v, out| {
                self.val_unit(v, from, out);
                if o.descending {
                    out.push_str(" DESC");
                }
            });
            if let Some(l) = &o.limit {
                out.push_str(" LIMIT ");
                out.push_str(l);
            }
        }
    }
}
