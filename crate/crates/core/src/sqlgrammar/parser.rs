//! Recursive-descent parser for the supported subset, with identifier
//! resolution against a schema.
//!
//! Each unit's FROM clause is parsed before its select list so column
//! names resolve in a known scope. Unqualified names try the unit's own
//! tables first and then the enclosing unit's.

use crate::relgraph::Schema;

use super::ast::{
    Agg, ArithOp, CmpOp, ColUnit, Cond, Conj, From, Group, Join, Operand, Order, Pred, SetOp, Sql,
    Unit, ValUnit,
};
use super::grammar::ArityLimits;
use super::lexer::{lex, Span, Tok, Token};
use super::SqlError;

const RESERVED: [&str; 22] = [
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT", "ASC", "DESC", "AND", "OR",
    "NOT", "IN", "LIKE", "JOIN", "ON", "AS", "DISTINCT", "UNION", "INTERSECT", "EXCEPT",
];

const UNSUPPORTED: [&str; 24] = [
    "OVER", "PARTITION", "WINDOW", "BETWEEN", "CASE", "WHEN", "EXISTS", "IS", "NULL", "LEFT", "RIGHT",
    "OUTER", "FULL", "NATURAL", "USING", "WITH", "OFFSET", "CAST", "ALL", "ANY", "INNER", "CROSS",
    "FETCH", "TOP",
];

/// Parses with the default arity limits.
pub fn parse_sql(text: &str, schema: &Schema) -> Result<Sql, SqlError> {
    parse_sql_with_limits(text, schema, &ArityLimits::default())
}

pub fn parse_sql_with_limits(text: &str, schema: &Schema, limits: &ArityLimits) -> Result<Sql, SqlError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        schema,
        limits,
        scopes: Vec::new(),
        end: text.len(),
    };
    let sql = p.sql()?;
    if let Some(t) = p.peek() {
        return Err(SqlError::unsupported("unexpected trailing input", t.span));
    }
    Ok(sql)
}

struct Scope {
    /// `(table index, alias)` for each FROM entry.
    tables: Vec<(usize, Option<String>)>,
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    schema: &'a Schema,
    limits: &'a ArityLimits,
    scopes: Vec<Scope>,
    end: usize,
}

fn fold(s: &str) -> String {
    s.to_lowercase()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset)
    }

    fn here(&self) -> Span {
        self.peek().map_or(Span { start: self.end, end: self.end }, |t| t.span)
    }

    fn at_word(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(kw))
    }

    fn at_sym(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is_sym(s))
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        let hit = self.at_word(kw);
        self.pos += hit as usize;
        hit
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.at_sym(s);
        self.pos += hit as usize;
        hit
    }

    fn expect_word(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {kw}")))
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{s}`")))
        }
    }

    fn unexpected(&self, what: &str) -> SqlError {
        match self.peek() {
            Some(t) => match &t.tok {
                Tok::Word(w) if UNSUPPORTED.iter().any(|u| u.eq_ignore_ascii_case(w)) => {
                    SqlError::unsupported(format!("{} is not supported", w.to_uppercase()), t.span)
                }
                _ => SqlError::unsupported(what.to_string(), t.span),
            },
            None => SqlError::unsupported(format!("{what}, found end of input"), self.here()),
        }
    }

    /// An identifier that is not a keyword.
    fn ident(&mut self) -> Result<(String, Span), SqlError> {
        match self.peek() {
            Some(Token { tok: Tok::Word(w), span })
                if !RESERVED.iter().chain(&UNSUPPORTED).any(|k| k.eq_ignore_ascii_case(w)) =>
            {
                let out = (w.clone(), *span);
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.unexpected("expected an identifier")),
        }
    }

    fn check_arity(clause: &'static str, count: usize, limit: usize) -> Result<(), SqlError> {
        if count > limit {
            return Err(SqlError::ArityOverflow { clause, count, limit });
        }
        Ok(())
    }

    // ---- statements ----------------------------------------------------

    fn sql(&mut self) -> Result<Sql, SqlError> {
        let left = self.unit()?;
        let op = if self.eat_word("UNION") {
            Some(SetOp::Union)
        } else if self.eat_word("INTERSECT") {
            Some(SetOp::Intersect)
        } else if self.eat_word("EXCEPT") {
            Some(SetOp::Except)
        } else {
            None
        };
        let compound = match op {
            None => None,
            Some(op) => {
                if self.at_word("ALL") {
                    return Err(self.unexpected(""));
                }
                let right = self.unit()?;
                if ["UNION", "INTERSECT", "EXCEPT"].iter().any(|k| self.at_word(k)) {
                    return Err(SqlError::unsupported("more than one set operation", self.here()));
                }
                Some((op, Box::new(right)))
            }
        };
        Ok(Sql { left, compound })
    }

    /// Index of this unit's FROM keyword, skipping parenthesized groups.
    fn find_from(&self) -> Result<usize, SqlError> {
        let mut depth = 0usize;
        for (i, t) in self.tokens.iter().enumerate().skip(self.pos) {
            if t.is_sym("(") {
                depth += 1;
            } else if t.is_sym(")") {
                if depth == 0 {
                    break;
                }
                depth -= 1;
            } else if depth == 0 && t.is_word("FROM") {
                return Ok(i);
            } else if depth == 0
                && ["WHERE", "UNION", "INTERSECT", "EXCEPT", "GROUP", "ORDER"].iter().any(|k| t.is_word(k))
            {
                break;
            }
        }
        Err(SqlError::unsupported("SELECT without FROM", self.here()))
    }

    fn unit(&mut self) -> Result<Unit, SqlError> {
        self.expect_word("SELECT")?;
        let select_start = self.pos;
        let from_at = self.find_from()?;

        self.pos = from_at + 1;
        let from = self.from_clause()?;
        let after_from = self.pos;

        self.pos = select_start;
        let distinct = self.eat_word("DISTINCT");
        let mut select = vec![self.val_unit()?];
        while self.eat_sym(",") {
            select.push(self.val_unit()?);
        }
        if self.pos != from_at {
            return Err(self.unexpected("expected `,` or FROM"));
        }
        Self::check_arity("SELECT", select.len(), self.limits.select)?;
        self.pos = after_from;

        let where_clause = if self.eat_word("WHERE") { Some(self.cond()?) } else { None };
        let group = if self.eat_word("GROUP") {
            self.expect_word("BY")?;
            let mut columns = vec![self.column_ref()?];
            while self.eat_sym(",") {
                columns.push(self.column_ref()?);
            }
            Self::check_arity("GROUP BY", columns.len(), self.limits.group_by)?;
            let having = if self.eat_word("HAVING") { Some(self.cond()?) } else { None };
            Some(Group { columns, having })
        } else {
            None
        };
        if self.at_word("HAVING") {
            return Err(SqlError::unsupported("HAVING without GROUP BY", self.here()));
        }
        let order = if self.eat_word("ORDER") {
            self.expect_word("BY")?;
            let mut items = Vec::new();
            let mut directions = Vec::new();
            loop {
                let start = self.here();
                items.push(self.val_unit()?);
                let desc = if self.eat_word("DESC") {
                    true
                } else {
                    self.eat_word("ASC");
                    false
                };
                directions.push((desc, start));
                if !self.eat_sym(",") {
                    break;
                }
            }
            if let Some((_, span)) = directions.iter().find(|(d, _)| *d != directions[0].0) {
                return Err(SqlError::unsupported("mixed ORDER BY directions", *span));
            }
            Self::check_arity("ORDER BY", items.len(), self.limits.order_by)?;
            let limit = if self.eat_word("LIMIT") {
                match self.peek() {
                    Some(Token { tok: Tok::Number(n), .. }) => {
                        let n = n.clone();
                        self.pos += 1;
                        Some(n)
                    }
                    _ => return Err(self.unexpected("expected a number after LIMIT")),
                }
            } else {
                None
            };
            Some(Order {
                items,
                descending: directions[0].0,
                limit,
            })
        } else {
            None
        };
        if self.at_word("LIMIT") {
            return Err(SqlError::unsupported("LIMIT without ORDER BY", self.here()));
        }
        self.scopes.pop();
        Ok(Unit {
            distinct,
            select,
            from,
            where_clause,
            group,
            order,
        })
    }

    /// Parses the FROM list and pushes its scope; ON columns resolve once
    /// every table of the list is known.
    fn from_clause(&mut self) -> Result<From, SqlError> {
        let mut entries = vec![self.table_entry()?];
        let mut raw_joins: Vec<Option<(usize, usize)>> = Vec::new();
        loop {
            if self.eat_sym(",") {
                entries.push(self.table_entry()?);
                raw_joins.push(None);
            } else if self.at_word("JOIN") || (self.at_word("INNER") && self.peek_at(1).is_some_and(|t| t.is_word("JOIN"))) {
                self.eat_word("INNER");
                self.pos += 1;
                entries.push(self.table_entry()?);
                if self.eat_word("ON") {
                    let left = self.pos;
                    self.skip_column_ref()?;
                    self.expect_sym("=")?;
                    let right = self.pos;
                    self.skip_column_ref()?;
                    if self.at_word("AND") {
                        return Err(SqlError::unsupported("join with more than one ON condition", self.here()));
                    }
                    raw_joins.push(Some((left, right)));
                } else {
                    raw_joins.push(None);
                }
            } else {
                break;
            }
        }
        Self::check_arity("FROM", entries.len(), self.limits.from)?;
        for (i, (t, _, span)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(u, _, _)| u == t) {
                return Err(SqlError::unsupported("a table may appear only once in FROM", *span));
            }
        }
        self.scopes.push(Scope {
            tables: entries.iter().map(|(t, a, _)| (*t, a.clone())).collect(),
        });
        let resume = self.pos;
        let mut joins = Vec::with_capacity(raw_joins.len());
        for raw in raw_joins {
            joins.push(match raw {
                None => Join::Cross,
                Some((l, r)) => {
                    self.pos = l;
                    let a = self.column_ref()?;
                    self.pos = r;
                    let b = self.column_ref()?;
                    Join::On(a, b)
                }
            });
        }
        self.pos = resume;
        Ok(From {
            tables: entries.iter().map(|(t, _, _)| *t).collect(),
            joins,
        })
    }

    fn table_entry(&mut self) -> Result<(usize, Option<String>, Span), SqlError> {
        if self.at_sym("(") {
            return Err(SqlError::unsupported("subquery in FROM", self.here()));
        }
        let (name, span) = self.ident()?;
        let key = fold(&name);
        let matches: Vec<usize> = (0..self.schema.tables.len())
            .filter(|&t| self.schema.tables[t].identifier() == key)
            .collect();
        let table = match matches.as_slice() {
            [t] => *t,
            [] => return Err(SqlError::UnknownIdentifier { name, span }),
            _ => return Err(SqlError::Ambiguous { name, span }),
        };
        let alias = if self.eat_word("AS") || self.ident_ahead() {
            Some(fold(&self.ident()?.0))
        } else {
            None
        };
        Ok((table, alias, span))
    }

    fn ident_ahead(&self) -> bool {
        match self.peek() {
            Some(Token { tok: Tok::Word(w), .. }) => !RESERVED.iter().chain(&UNSUPPORTED).any(|k| k.eq_ignore_ascii_case(w)),
            _ => false,
        }
    }

    fn skip_column_ref(&mut self) -> Result<(), SqlError> {
        self.ident()?;
        if self.eat_sym(".") {
            self.ident()?;
        }
        Ok(())
    }

    // ---- expressions ---------------------------------------------------

    fn column_ref(&mut self) -> Result<usize, SqlError> {
        let (first, span) = self.ident()?;
        if self.eat_sym(".") {
            if self.at_sym("*") {
                return Err(SqlError::unsupported("qualified `*`", self.here()));
            }
            let (name, cspan) = self.ident()?;
            let table = self.resolve_table(&first, span)?;
            let key = fold(&name);
            let hits: Vec<usize> = self.columns_of(table).filter(|&c| self.schema.columns[c].identifier() == key).collect();
            return match hits.as_slice() {
                [c] => Ok(*c),
                [] => Err(SqlError::UnknownIdentifier {
                    name: format!("{first}.{name}"),
                    span: Span { start: span.start, end: cspan.end },
                }),
                _ => Err(SqlError::Ambiguous { name, span: cspan }),
            };
        }
        let key = fold(&first);
        for scope in self.scopes.iter().rev() {
            let hits: Vec<usize> = scope
                .tables
                .iter()
                .flat_map(|&(t, _)| self.columns_of(t))
                .filter(|&c| self.schema.columns[c].identifier() == key)
                .collect();
            match hits.as_slice() {
                [] => continue,
                [c] => return Ok(*c),
                _ => return Err(SqlError::Ambiguous { name: first, span }),
            }
        }
        Err(SqlError::UnknownIdentifier { name: first, span })
    }

    fn columns_of(&self, table: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.schema.columns.len()).filter(move |&c| self.schema.columns[c].owner_table == table)
    }

    fn resolve_table(&self, name: &str, span: Span) -> Result<usize, SqlError> {
        let key = fold(name);
        for scope in self.scopes.iter().rev() {
            if let Some(&(t, _)) = scope.tables.iter().find(|(_, a)| a.as_deref() == Some(key.as_str())) {
                return Ok(t);
            }
            if let Some(&(t, _)) = scope.tables.iter().find(|(t, _)| self.schema.tables[*t].identifier() == key) {
                return Ok(t);
            }
        }
        let hits: Vec<usize> = (0..self.schema.tables.len())
            .filter(|&t| self.schema.tables[t].identifier() == key)
            .collect();
        match hits.as_slice() {
            [t] => Ok(*t),
            [] => Err(SqlError::UnknownIdentifier { name: name.to_string(), span }),
            _ => Err(SqlError::Ambiguous { name: name.to_string(), span }),
        }
    }

    fn col_unit(&mut self) -> Result<ColUnit, SqlError> {
        if self.eat_sym("*") {
            return Ok(ColUnit::Star);
        }
        let agg = match self.peek() {
            Some(Token { tok: Tok::Word(w), .. }) if self.peek_at(1).is_some_and(|t| t.is_sym("(")) => {
                match w.to_ascii_uppercase().as_str() {
                    "MAX" => Some(Agg::Max),
                    "MIN" => Some(Agg::Min),
                    "COUNT" => Some(Agg::Count),
                    "SUM" => Some(Agg::Sum),
                    "AVG" => Some(Agg::Avg),
                    _ => return Err(SqlError::unsupported(format!("function {w}"), self.here())),
                }
            }
            _ => None,
        };
        let Some(agg) = agg else {
            return Ok(ColUnit::Column(Agg::None, self.column_ref()?));
        };
        self.pos += 2;
        let out = if agg == Agg::Count && self.eat_sym("*") {
            ColUnit::CountStar
        } else if self.eat_word("DISTINCT") {
            if agg != Agg::Count {
                return Err(SqlError::unsupported("DISTINCT inside an aggregate other than COUNT", self.here()));
            }
            ColUnit::Column(Agg::CountDistinct, self.column_ref()?)
        } else {
            ColUnit::Column(agg, self.column_ref()?)
        };
        self.expect_sym(")")?;
        Ok(out)
    }

    fn val_unit(&mut self) -> Result<ValUnit, SqlError> {
        let left = self.col_unit()?;
        let op = match self.peek() {
            Some(t) if t.is_sym("-") => ArithOp::Minus,
            Some(t) if t.is_sym("+") => ArithOp::Plus,
            Some(t) if t.is_sym("*") => ArithOp::Times,
            Some(t) if t.is_sym("/") => ArithOp::Divide,
            _ => return Ok(ValUnit::Unary(left)),
        };
        self.pos += 1;
        let right = self.col_unit()?;
        if ["-", "+", "*", "/"].iter().any(|s| self.at_sym(s)) {
            return Err(SqlError::unsupported("more than one arithmetic operator", self.here()));
        }
        Ok(ValUnit::Binary(op, left, right))
    }

    fn cond(&mut self) -> Result<Cond, SqlError> {
        let mut preds = vec![self.pred()?];
        let mut conj = None;
        loop {
            let next = if self.at_word("AND") {
                Conj::And
            } else if self.at_word("OR") {
                Conj::Or
            } else {
                break;
            };
            if conj.is_some_and(|c| c != next) {
                return Err(SqlError::unsupported("mixed AND and OR", self.here()));
            }
            conj = Some(next);
            self.pos += 1;
            preds.push(self.pred()?);
        }
        Self::check_arity("condition", preds.len(), self.limits.conditions)?;
        Ok(Cond {
            conj: conj.unwrap_or(Conj::And),
            preds,
        })
    }

    fn nested(&mut self) -> Result<Box<Sql>, SqlError> {
        let open = self.here();
        self.expect_sym("(")?;
        if !self.at_word("SELECT") {
            return Err(self.unexpected("expected a subquery"));
        }
        if self.scopes.len() >= 2 {
            return Err(SqlError::unsupported("subqueries nested more than one level", open));
        }
        let q = self.sql()?;
        self.expect_sym(")")?;
        Ok(Box::new(q))
    }

    fn pred(&mut self) -> Result<Pred, SqlError> {
        if self.at_sym("(") {
            return Err(SqlError::unsupported("parenthesized condition", self.here()));
        }
        if self.at_word("NOT") {
            return Err(SqlError::unsupported("NOT before a predicate", self.here()));
        }
        let left = self.val_unit()?;
        let negated = self.eat_word("NOT");
        if self.eat_word("IN") {
            return Ok(Pred::In {
                negated,
                left,
                query: self.nested()?,
            });
        }
        let op = if self.eat_word("LIKE") {
            if negated { CmpOp::NotLike } else { CmpOp::Like }
        } else if negated {
            return Err(self.unexpected("expected IN or LIKE after NOT"));
        } else {
            let op = match self.peek().map(|t| &t.tok) {
                Some(Tok::Sym("=")) => CmpOp::Eq,
                Some(Tok::Sym("!=")) | Some(Tok::Sym("<>")) => CmpOp::Ne,
                Some(Tok::Sym("<")) => CmpOp::Lt,
                Some(Tok::Sym(">")) => CmpOp::Gt,
                Some(Tok::Sym("<=")) => CmpOp::Le,
                Some(Tok::Sym(">=")) => CmpOp::Ge,
                _ => return Err(self.unexpected("expected a comparison operator")),
            };
            self.pos += 1;
            op
        };
        let right = self.operand()?;
        Ok(Pred::Compare { op, left, right })
    }

    fn operand(&mut self) -> Result<Operand, SqlError> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Sym("(")) => Ok(Operand::Nested(self.nested()?)),
            Some(Tok::Number(n)) | Some(Tok::Str(n)) => {
                self.pos += 1;
                Ok(Operand::Literal(n))
            }
            Some(Tok::Sym("-")) if matches!(self.peek_at(1).map(|t| &t.tok), Some(Tok::Number(_))) => {
                let Some(Tok::Number(n)) = self.peek_at(1).map(|t| t.tok.clone()) else { unreachable!() };
                self.pos += 2;
                Ok(Operand::Literal(format!("-{n}")))
            }
            _ => {
                let c = self.col_unit()?;
                if ["-", "+", "*", "/"].iter().any(|s| self.at_sym(s)) {
                    return Err(SqlError::unsupported("arithmetic on the right of a comparison", self.here()));
                }
                Ok(Operand::Column(c))
            }
        }
    }
}
