//! Recursive-descent parser for the model DSL family.
//!
//! One grammar, five top-level kinds: `architecture`, `qos_pattern`,
//! `platform`, `mapping`, `resources`. Parsing also enforces each payload
//! type's structural invariants, so a successful parse always yields a
//! valid document. Syntax errors carry line/column and the expected token
//! set; invariant violations carry line/column and a message.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::codegen::{template_placeholders, MappingModel, MappingRule, TEMPLATE_PLACEHOLDERS};
use crate::deploy::{ResourceModel, ResourceNode};
use crate::lexer::{tokenize, Keyword, LexError, Token, TokenKind};
use crate::model::{
    ArchitectureModel, Attachment, Component, Connector, ElementKind, ElementPath, Fragment,
    ModelDocument, Port, PortDirection, Role, RoleDirection, Scalar, Stage,
};
use crate::pattern::{
    placeholders_in, ActionTpl, AttachmentTpl, ComponentTpl, ConnectorTpl, FragmentTpl, IntTpl,
    NumTpl, ParamKind, PathTpl, PatternParam, PortSelTpl, PortTpl, PropertyTpl, QoSPattern,
    RoleTpl, ScalarTpl, TplStr,
};
use crate::platform::{PlatformModel, RewriteRule};
use crate::property::PropertyExpr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{0}")]
    Lex(#[from] LexError),
    #[error("syntax error at {line}:{col}: expected {}, found {found}", expected.join(" | "))]
    Syntax {
        line: usize,
        col: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("invalid model at {line}:{col}: {message}")]
    Invalid {
        line: usize,
        col: usize,
        message: String,
    },
}

/// Parses one document of any kind.
pub fn parse_model(source: &str) -> Result<ModelDocument, ParseError> {
    let source = source.strip_prefix('\u{feff}').unwrap_or(source);
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let doc = parser.document()?;
    parser.expect_eof()?;
    Ok(doc)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        matches!(&self.peek().kind, TokenKind::Keyword(k) if *k == kw)
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.kind.describe(),
        })
    }

    fn invalid<T>(
        &self,
        line: usize,
        col: usize,
        message: impl Into<String>,
    ) -> Result<T, ParseError> {
        Err(ParseError::Invalid {
            line,
            col,
            message: message.into(),
        })
    }

    fn invalid_here<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError::Invalid {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn expect_kw(&mut self, kw: Keyword) -> Result<Token, ParseError> {
        if self.at_kw(kw) {
            Ok(self.bump())
        } else {
            self.fail(&[&format!("'{}'", kw.as_str())])
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<Token, ParseError> {
        if std::mem::discriminant(&self.peek().kind) == std::mem::discriminant(&kind) {
            Ok(self.bump())
        } else {
            self.fail(&[what])
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek().kind, TokenKind::Eof) {
            Ok(())
        } else {
            self.fail(&["end of input"])
        }
    }

    /// Plain identifier; keywords, globs and templates are rejected.
    fn ident(&mut self, what: &str) -> Result<(String, Token), ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                let t = self.bump();
                Ok((s, t))
            }
            _ => self.fail(&[what]),
        }
    }

    /// Identifier or `$`-templated word (pattern context).
    fn word_tpl(&mut self, what: &str) -> Result<TplStr, ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(s) | TokenKind::Template(s) => {
                let s = s.clone();
                self.bump();
                Ok(TplStr(s))
            }
            _ => self.fail(&[what]),
        }
    }

    /// Identifier or glob (concrete match patterns).
    fn glob(&mut self, what: &str) -> Result<String, ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(s) | TokenKind::Glob(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.fail(&[what]),
        }
    }

    /// Identifier, glob, or template (pattern `ensures exists`).
    fn glob_tpl(&mut self, what: &str) -> Result<TplStr, ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(s) | TokenKind::Glob(s) | TokenKind::Template(s) => {
                let s = s.clone();
                self.bump();
                Ok(TplStr(s))
            }
            _ => self.fail(&[what]),
        }
    }

    fn number(&mut self) -> Result<(f64, Token), ParseError> {
        match &self.peek().kind {
            TokenKind::Number(v) => {
                let v = *v;
                let t = self.bump();
                Ok((v, t))
            }
            _ => self.fail(&["number"]),
        }
    }

    fn integer(&mut self) -> Result<(i64, Token), ParseError> {
        let (v, t) = self.number()?;
        if v.fract() != 0.0 {
            return self.invalid(t.line, t.col, format!("expected an integer, got {v}"));
        }
        Ok((v as i64, t))
    }

    fn string(&mut self) -> Result<(String, Token), ParseError> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                let t = self.bump();
                Ok((s, t))
            }
            _ => self.fail(&["string"]),
        }
    }

    fn scalar(&mut self) -> Result<Scalar, ParseError> {
        match &self.peek().kind {
            TokenKind::Number(v) => {
                let v = *v;
                self.bump();
                Ok(Scalar::Number(v))
            }
            TokenKind::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(Scalar::Text(s))
            }
            _ => self.fail(&["number", "string"]),
        }
    }

    /// `a::b::c`; segments are identifiers plus the reserved `connection`.
    fn path(&mut self) -> Result<(ElementPath, Token), ParseError> {
        let (first, start) = match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                let t = self.bump();
                (s, t)
            }
            _ => return self.fail(&["path"]),
        };
        let mut segments = vec![first];
        while matches!(self.peek().kind, TokenKind::PathSep) {
            self.bump();
            match &self.peek().kind {
                TokenKind::Ident(s) => {
                    segments.push(s.clone());
                    self.bump();
                }
                TokenKind::Keyword(Keyword::Connection) => {
                    segments.push("connection".to_string());
                    self.bump();
                }
                _ => return self.fail(&["path segment"]),
            }
        }
        Ok((ElementPath::new(segments), start))
    }

    /// Path template; segments may carry placeholders.
    fn path_tpl(&mut self) -> Result<PathTpl, ParseError> {
        let mut segments = vec![self.word_tpl("path")?];
        while matches!(self.peek().kind, TokenKind::PathSep) {
            self.bump();
            match &self.peek().kind {
                TokenKind::Ident(s) | TokenKind::Template(s) => {
                    segments.push(TplStr(s.clone()));
                    self.bump();
                }
                TokenKind::Keyword(Keyword::Connection) => {
                    segments.push(TplStr("connection".to_string()));
                    self.bump();
                }
                _ => return self.fail(&["path segment"]),
            }
        }
        Ok(PathTpl(segments))
    }

    fn element_kind(&mut self) -> Result<ElementKind, ParseError> {
        if self.eat_kw(Keyword::Component) {
            Ok(ElementKind::Component)
        } else if self.eat_kw(Keyword::Connector) {
            Ok(ElementKind::Connector)
        } else {
            self.fail(&["'component'", "'connector'"])
        }
    }

    // -----------------------------------------------------------------------
    // Top level
    // -----------------------------------------------------------------------

    fn document(&mut self) -> Result<ModelDocument, ParseError> {
        match &self.peek().kind {
            TokenKind::Keyword(Keyword::Architecture) => {
                self.bump();
                self.architecture().map(ModelDocument::Architecture)
            }
            TokenKind::Keyword(Keyword::QosPattern) => {
                self.bump();
                self.qos_pattern().map(ModelDocument::QoSPattern)
            }
            TokenKind::Keyword(Keyword::Platform) => {
                self.bump();
                self.platform().map(ModelDocument::Platform)
            }
            TokenKind::Keyword(Keyword::Mapping) => {
                self.bump();
                self.mapping().map(ModelDocument::Mapping)
            }
            TokenKind::Keyword(Keyword::Resources) => {
                self.bump();
                self.resources().map(ModelDocument::Resources)
            }
            _ => self.fail(&[
                "'architecture'",
                "'qos_pattern'",
                "'platform'",
                "'mapping'",
                "'resources'",
            ]),
        }
    }

    // -----------------------------------------------------------------------
    // architecture
    // -----------------------------------------------------------------------

    fn architecture(&mut self) -> Result<ArchitectureModel, ParseError> {
        let (name, _) = self.ident("architecture name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut model = ArchitectureModel::empty(name);

        if self.eat_kw(Keyword::Stage) {
            let (stage, t) = self.ident("stage name")?;
            model.stage = match stage.as_str() {
                "GEIM" => Stage::Geim,
                "intermediate" => Stage::Intermediate,
                "GESM" => Stage::Gesm,
                other => return self.invalid(t.line, t.col, format!("unknown stage {other}")),
            };
        }

        if self.eat_kw(Keyword::Types) {
            self.expect(TokenKind::LBrace, "'{'")?;
            if !matches!(self.peek().kind, TokenKind::RBrace) {
                loop {
                    let (ty, t) = self.ident("type name")?;
                    if !model.types.insert(ty.clone()) {
                        return self.invalid(t.line, t.col, format!("duplicate type {ty}"));
                    }
                    if matches!(self.peek().kind, TokenKind::Semi) {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(TokenKind::RBrace, "'}'")?;
        }

        // Attachments are checked once the whole body is known, since they
        // may reference elements declared later.
        let mut attach_positions: Vec<(usize, usize)> = Vec::new();
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    break;
                }
                TokenKind::Keyword(Keyword::Component) => {
                    self.bump();
                    let c = self.component(&model.types)?;
                    self.declare_element(&mut model, &c.name)?;
                    model.components.push(c);
                }
                TokenKind::Keyword(Keyword::Connector) => {
                    self.bump();
                    let c = self.connector(&model.types)?;
                    self.declare_element(&mut model, &c.name)?;
                    model.connectors.push(c);
                }
                TokenKind::Keyword(Keyword::Attach) => {
                    let at = self.bump();
                    let (from, _) = self.path()?;
                    self.expect_kw(Keyword::To)?;
                    let (to, _) = self.path()?;
                    model.attachments.push(Attachment::new(from, to));
                    attach_positions.push((at.line, at.col));
                }
                TokenKind::Keyword(Keyword::Property) => {
                    self.bump();
                    let prop = self.property_expr()?;
                    model.properties.push(prop);
                }
                TokenKind::Keyword(Keyword::Attr) => {
                    self.bump();
                    let (key, t) = self.ident("attribute name")?;
                    self.expect(TokenKind::Eq, "'='")?;
                    let value = self.scalar()?;
                    if model.attributes.insert(key.clone(), value).is_some() {
                        return self.invalid(t.line, t.col, format!("duplicate attribute {key}"));
                    }
                }
                _ => {
                    return self.fail(&[
                        "'component'",
                        "'connector'",
                        "'attach'",
                        "'property'",
                        "'attr'",
                        "'}'",
                    ])
                }
            }
        }

        self.check_attachments(&model, &attach_positions)?;
        debug_assert!(crate::model::validate_structure(&model).is_clean());
        Ok(model)
    }

    fn declare_element(&self, model: &mut ArchitectureModel, name: &str) -> Result<(), ParseError> {
        if model.has_element(name) {
            // Position points at the body we just parsed; close enough for
            // a name-level diagnostic.
            return self.invalid_here(format!("duplicate name {name}"));
        }
        Ok(())
    }

    fn component(&mut self, types: &BTreeSet<String>) -> Result<Component, ParseError> {
        let (name, _) = self.ident("component name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut component = Component {
            name,
            ports: vec![],
            attributes: BTreeMap::new(),
        };
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return Ok(component);
                }
                TokenKind::Keyword(Keyword::Port) => {
                    self.bump();
                    let (name, t) = self.ident("port name")?;
                    self.expect(TokenKind::Colon, "':'")?;
                    let direction = if self.eat_kw(Keyword::Provides) {
                        PortDirection::Provides
                    } else if self.eat_kw(Keyword::Requires) {
                        PortDirection::Requires
                    } else {
                        return self.fail(&["'provides'", "'requires'"]);
                    };
                    let (message_type, tt) = self.ident("message type")?;
                    if component.port(&name).is_some() {
                        return self.invalid(t.line, t.col, format!("duplicate port name {name}"));
                    }
                    if !types.contains(&message_type) {
                        return self.invalid(
                            tt.line,
                            tt.col,
                            format!("undeclared message type {message_type}"),
                        );
                    }
                    component.ports.push(Port {
                        name,
                        direction,
                        message_type,
                    });
                }
                TokenKind::Keyword(Keyword::Attr) => {
                    self.bump();
                    let (key, t) = self.ident("attribute name")?;
                    self.expect(TokenKind::Eq, "'='")?;
                    let value = self.scalar()?;
                    if component.attributes.insert(key.clone(), value).is_some() {
                        return self.invalid(t.line, t.col, format!("duplicate attribute {key}"));
                    }
                }
                _ => return self.fail(&["'port'", "'attr'", "'}'"]),
            }
        }
    }

    fn connector(&mut self, types: &BTreeSet<String>) -> Result<Connector, ParseError> {
        let (name, _) = self.ident("connector name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut connector = Connector {
            name,
            roles: vec![],
            attributes: BTreeMap::new(),
        };
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return Ok(connector);
                }
                TokenKind::Keyword(Keyword::Role) => {
                    self.bump();
                    let (name, t) = self.ident("role name")?;
                    self.expect(TokenKind::Colon, "':'")?;
                    let direction = if self.eat_kw(Keyword::Accepts) {
                        RoleDirection::Accepts
                    } else if self.eat_kw(Keyword::Emits) {
                        RoleDirection::Emits
                    } else {
                        return self.fail(&["'accepts'", "'emits'"]);
                    };
                    let (message_type, tt) = self.ident("message type")?;
                    if connector.role(&name).is_some() {
                        return self.invalid(t.line, t.col, format!("duplicate role name {name}"));
                    }
                    if !types.contains(&message_type) {
                        return self.invalid(
                            tt.line,
                            tt.col,
                            format!("undeclared message type {message_type}"),
                        );
                    }
                    connector.roles.push(Role {
                        name,
                        direction,
                        message_type,
                    });
                }
                TokenKind::Keyword(Keyword::Attr) => {
                    self.bump();
                    let (key, t) = self.ident("attribute name")?;
                    self.expect(TokenKind::Eq, "'='")?;
                    let value = self.scalar()?;
                    if connector.attributes.insert(key.clone(), value).is_some() {
                        return self.invalid(t.line, t.col, format!("duplicate attribute {key}"));
                    }
                }
                _ => return self.fail(&["'role'", "'attr'", "'}'"]),
            }
        }
    }

    fn check_attachments(
        &self,
        model: &ArchitectureModel,
        positions: &[(usize, usize)],
    ) -> Result<(), ParseError> {
        enum End<'a> {
            Port(&'a Port),
            Role(&'a Role),
        }
        let resolve = |p: &ElementPath| -> Option<End<'_>> {
            if p.segments.len() != 2 {
                return None;
            }
            if let Some(c) = model.component(p.head()) {
                return c.port(&p.segments[1]).map(End::Port);
            }
            model
                .connector(p.head())
                .and_then(|c| c.role(&p.segments[1]).map(End::Role))
        };
        let mut pairs = BTreeSet::new();
        for (a, (line, col)) in model.attachments.iter().zip(positions) {
            let (line, col) = (*line, *col);
            let from = resolve(&a.from).ok_or(()).or_else(|_| {
                self.invalid(
                    line,
                    col,
                    format!("unresolved attachment endpoint {}", a.from),
                )
            })?;
            let to = resolve(&a.to).ok_or(()).or_else(|_| {
                self.invalid(
                    line,
                    col,
                    format!("unresolved attachment endpoint {}", a.to),
                )
            })?;
            let from_ok = matches!(&from, End::Port(p) if p.direction == PortDirection::Requires)
                || matches!(&from, End::Role(r) if r.direction == RoleDirection::Emits);
            if !from_ok {
                return self.invalid(
                    line,
                    col,
                    format!(
                        "attachment must start at a requires port or emits role, but {} is not one",
                        a.from
                    ),
                );
            }
            let to_ok = matches!(&to, End::Port(p) if p.direction == PortDirection::Provides)
                || matches!(&to, End::Role(r) if r.direction == RoleDirection::Accepts);
            if !to_ok {
                return self.invalid(
                    line,
                    col,
                    format!(
                        "attachment must end at a provides port or accepts role, but {} is not one",
                        a.to
                    ),
                );
            }
            let ty = |e: &End<'_>| match e {
                End::Port(p) => p.message_type.clone(),
                End::Role(r) => r.message_type.clone(),
            };
            if ty(&from) != ty(&to) {
                return self.invalid(
                    line,
                    col,
                    format!(
                        "attachment message types differ: {} vs {}",
                        ty(&from),
                        ty(&to)
                    ),
                );
            }
            if !pairs.insert((a.from.clone(), a.to.clone())) {
                return self.invalid(
                    line,
                    col,
                    format!("duplicate attachment {} -> {}", a.from, a.to),
                );
            }
        }
        Ok(())
    }

    fn property_expr(&mut self) -> Result<PropertyExpr, ParseError> {
        match &self.peek().kind {
            TokenKind::Keyword(Keyword::AllPortsConnected) => {
                self.bump();
                Ok(PropertyExpr::AllPortsConnected)
            }
            TokenKind::Keyword(Keyword::TypeClosed) => {
                self.bump();
                Ok(PropertyExpr::TypeClosed)
            }
            TokenKind::Keyword(Keyword::Exists) => {
                self.bump();
                let kind = self.element_kind()?;
                let pattern = self.glob("element name or glob")?;
                Ok(PropertyExpr::Exists { kind, pattern })
            }
            TokenKind::Keyword(Keyword::Replication) => {
                self.bump();
                self.expect(TokenKind::LParen, "'('")?;
                let (base, _) = self.ident("component name")?;
                self.expect(TokenKind::RParen, "')'")?;
                self.expect(TokenKind::Ge, "'>='")?;
                let (min, t) = self.integer()?;
                if min < 1 {
                    return self.invalid(
                        t.line,
                        t.col,
                        format!("replication bound must be >= 1, got {min}"),
                    );
                }
                Ok(PropertyExpr::Replication { base, min })
            }
            TokenKind::Keyword(Keyword::Connected) => {
                self.bump();
                self.expect(TokenKind::LParen, "'('")?;
                let (a, _) = self.path()?;
                self.expect(TokenKind::Comma, "','")?;
                let (b, _) = self.path()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(PropertyExpr::Connected { a, b })
            }
            TokenKind::Keyword(Keyword::AttrSum) => {
                self.bump();
                self.expect(TokenKind::LParen, "'('")?;
                let (attribute, _) = self.ident("attribute name")?;
                self.expect(TokenKind::RParen, "')'")?;
                self.expect(TokenKind::Le, "'<='")?;
                let (bound, _) = self.number()?;
                Ok(PropertyExpr::AttrSum { attribute, bound })
            }
            _ => self.fail(&[
                "'allPortsConnected'",
                "'typeClosed'",
                "'exists'",
                "'replication'",
                "'connected'",
                "'attrSum'",
            ]),
        }
    }

    // -----------------------------------------------------------------------
    // qos_pattern
    // -----------------------------------------------------------------------

    fn qos_pattern(&mut self) -> Result<QoSPattern, ParseError> {
        let (name, header) = self.ident("pattern name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut pattern = QoSPattern {
            name,
            params: vec![],
            fragments: vec![],
            actions: vec![],
            ensures: vec![],
        };
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    break;
                }
                TokenKind::Keyword(Keyword::Param) => {
                    self.bump();
                    let (name, t) = self.ident("parameter name")?;
                    self.expect(TokenKind::Colon, "':'")?;
                    let kind = if self.eat_kw(Keyword::Element) {
                        ParamKind::Element
                    } else if self.eat_kw(Keyword::Integer) {
                        ParamKind::Integer
                    } else if self.eat_kw(Keyword::NumberKind) {
                        ParamKind::Number
                    } else {
                        return self.fail(&["'element'", "'integer'", "'number'"]);
                    };
                    if pattern.params.iter().any(|p| p.name == name) {
                        return self.invalid(t.line, t.col, format!("duplicate parameter {name}"));
                    }
                    pattern.params.push(PatternParam { name, kind });
                }
                TokenKind::Keyword(Keyword::Fragment) => {
                    self.bump();
                    pattern.fragments.push(self.fragment_tpl()?);
                }
                TokenKind::Keyword(Keyword::Action) => {
                    self.bump();
                    pattern.actions.push(self.action_tpl()?);
                }
                TokenKind::Keyword(Keyword::Ensures) => {
                    self.bump();
                    pattern.ensures.push(self.property_tpl()?);
                }
                _ => return self.fail(&["'param'", "'fragment'", "'action'", "'ensures'", "'}'"]),
            }
        }
        self.validate_pattern(&pattern, &header)?;
        Ok(pattern)
    }

    fn fragment_tpl(&mut self) -> Result<FragmentTpl, ParseError> {
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut fragment = FragmentTpl::default();
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return Ok(fragment);
                }
                TokenKind::Keyword(Keyword::Component) => {
                    self.bump();
                    fragment.components.push(self.component_tpl()?);
                }
                TokenKind::Keyword(Keyword::Connector) => {
                    self.bump();
                    fragment.connectors.push(self.connector_tpl()?);
                }
                TokenKind::Keyword(Keyword::Attach) => {
                    self.bump();
                    let from = self.path_tpl()?;
                    self.expect_kw(Keyword::To)?;
                    let to = self.path_tpl()?;
                    fragment.attachments.push(AttachmentTpl { from, to });
                }
                _ => return self.fail(&["'component'", "'connector'", "'attach'", "'}'"]),
            }
        }
    }

    fn scalar_tpl(&mut self) -> Result<ScalarTpl, ParseError> {
        match &self.peek().kind {
            TokenKind::Number(v) => {
                let v = *v;
                self.bump();
                Ok(ScalarTpl::Number(v))
            }
            TokenKind::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(ScalarTpl::Text(s))
            }
            TokenKind::Template(s)
                if s.starts_with('$') && !s[1..].contains('$') && !s[1..].is_empty() =>
            {
                let name = s[1..].to_string();
                self.bump();
                Ok(ScalarTpl::Param(name))
            }
            _ => self.fail(&["number", "string", "'$param'"]),
        }
    }

    fn component_tpl(&mut self) -> Result<ComponentTpl, ParseError> {
        let name = self.word_tpl("component name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut component = ComponentTpl {
            name,
            ports: vec![],
            attributes: vec![],
        };
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return Ok(component);
                }
                TokenKind::Keyword(Keyword::Port) => {
                    self.bump();
                    let name = self.word_tpl("port name")?;
                    self.expect(TokenKind::Colon, "':'")?;
                    let direction = if self.eat_kw(Keyword::Provides) {
                        PortDirection::Provides
                    } else if self.eat_kw(Keyword::Requires) {
                        PortDirection::Requires
                    } else {
                        return self.fail(&["'provides'", "'requires'"]);
                    };
                    let message_type = self.word_tpl("message type")?;
                    component.ports.push(PortTpl {
                        name,
                        direction,
                        message_type,
                    });
                }
                TokenKind::Keyword(Keyword::Attr) => {
                    self.bump();
                    let key = self.word_tpl("attribute name")?;
                    self.expect(TokenKind::Eq, "'='")?;
                    let value = self.scalar_tpl()?;
                    component.attributes.push((key, value));
                }
                _ => return self.fail(&["'port'", "'attr'", "'}'"]),
            }
        }
    }

    fn connector_tpl(&mut self) -> Result<ConnectorTpl, ParseError> {
        let name = self.word_tpl("connector name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut connector = ConnectorTpl {
            name,
            roles: vec![],
            attributes: vec![],
        };
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return Ok(connector);
                }
                TokenKind::Keyword(Keyword::Role) => {
                    self.bump();
                    let name = self.word_tpl("role name")?;
                    self.expect(TokenKind::Colon, "':'")?;
                    let direction = if self.eat_kw(Keyword::Accepts) {
                        RoleDirection::Accepts
                    } else if self.eat_kw(Keyword::Emits) {
                        RoleDirection::Emits
                    } else {
                        return self.fail(&["'accepts'", "'emits'"]);
                    };
                    let message_type = self.word_tpl("message type")?;
                    connector.roles.push(RoleTpl {
                        name,
                        direction,
                        message_type,
                    });
                }
                TokenKind::Keyword(Keyword::Attr) => {
                    self.bump();
                    let key = self.word_tpl("attribute name")?;
                    self.expect(TokenKind::Eq, "'='")?;
                    let value = self.scalar_tpl()?;
                    connector.attributes.push((key, value));
                }
                _ => return self.fail(&["'role'", "'attr'", "'}'"]),
            }
        }
    }

    fn int_tpl(&mut self) -> Result<IntTpl, ParseError> {
        match &self.peek().kind {
            TokenKind::Number(_) => {
                let (v, _) = self.integer()?;
                Ok(IntTpl::Lit(v))
            }
            TokenKind::Template(s)
                if s.starts_with('$') && !s[1..].is_empty() && !s[1..].contains('$') =>
            {
                let name = s[1..].to_string();
                self.bump();
                Ok(IntTpl::Param(name))
            }
            _ => self.fail(&["integer", "'$param'"]),
        }
    }

    fn action_tpl(&mut self) -> Result<ActionTpl, ParseError> {
        match &self.peek().kind {
            TokenKind::Keyword(Keyword::Include) => {
                self.bump();
                let fragment = self.word_tpl("fragment element name")?;
                Ok(ActionTpl::Include { fragment })
            }
            TokenKind::Keyword(Keyword::Exclude) => {
                self.bump();
                Ok(ActionTpl::Exclude {
                    target: self.path_tpl()?,
                })
            }
            TokenKind::Keyword(Keyword::ExcludeType) => {
                self.bump();
                Ok(ActionTpl::ExcludeType {
                    type_name: self.word_tpl("type name")?,
                })
            }
            TokenKind::Keyword(Keyword::Replicate) => {
                self.bump();
                let target = self.word_tpl("component name")?;
                let count = self.int_tpl()?;
                Ok(ActionTpl::Replicate { target, count })
            }
            TokenKind::Keyword(Keyword::Unify) => {
                self.bump();
                let element = self.word_tpl("element name")?;
                self.expect(TokenKind::PathSep, "'::'")?;
                let port = if self.eat_kw(Keyword::Port) {
                    PortSelTpl::EachAttached
                } else {
                    PortSelTpl::Named(self.word_tpl("port name or 'port'")?)
                };
                self.expect(TokenKind::PathSep, "'::'")?;
                self.expect_kw(Keyword::Connection)?;
                self.expect_kw(Keyword::With)?;
                let connector = self.word_tpl("connector name")?;
                Ok(ActionTpl::Unify {
                    element,
                    port,
                    connector,
                })
            }
            TokenKind::Keyword(Keyword::Decompose) => {
                self.bump();
                let target = self.word_tpl("component name")?;
                self.expect_kw(Keyword::Into)?;
                self.expect_kw(Keyword::Fragment)?;
                let fragment = self.fragment_tpl()?;
                self.expect_kw(Keyword::Portmap)?;
                self.expect(TokenKind::LBrace, "'{'")?;
                let mut port_map = Vec::new();
                while !matches!(self.peek().kind, TokenKind::RBrace) {
                    let key = self.word_tpl("port name")?;
                    self.expect(TokenKind::Arrow, "'->'")?;
                    let path = self.path_tpl()?;
                    port_map.push((key, path));
                    if matches!(self.peek().kind, TokenKind::Semi) {
                        self.bump();
                    }
                }
                self.bump();
                Ok(ActionTpl::Decompose {
                    target,
                    fragment,
                    port_map,
                })
            }
            _ => self.fail(&[
                "'include'",
                "'exclude'",
                "'exclude_type'",
                "'replicate'",
                "'unify'",
                "'decompose'",
            ]),
        }
    }

    fn property_tpl(&mut self) -> Result<PropertyTpl, ParseError> {
        match &self.peek().kind {
            TokenKind::Keyword(Keyword::AllPortsConnected) => {
                self.bump();
                Ok(PropertyTpl::AllPortsConnected)
            }
            TokenKind::Keyword(Keyword::TypeClosed) => {
                self.bump();
                Ok(PropertyTpl::TypeClosed)
            }
            TokenKind::Keyword(Keyword::Exists) => {
                self.bump();
                let kind = self.element_kind()?;
                let pattern = self.glob_tpl("element name or glob")?;
                Ok(PropertyTpl::Exists { kind, pattern })
            }
            TokenKind::Keyword(Keyword::Replication) => {
                self.bump();
                self.expect(TokenKind::LParen, "'('")?;
                let base = self.word_tpl("component name")?;
                self.expect(TokenKind::RParen, "')'")?;
                self.expect(TokenKind::Ge, "'>='")?;
                let min = self.int_tpl()?;
                if let IntTpl::Lit(v) = &min {
                    if *v < 1 {
                        return self
                            .invalid_here(format!("replication bound must be >= 1, got {v}"));
                    }
                }
                Ok(PropertyTpl::Replication { base, min })
            }
            TokenKind::Keyword(Keyword::Connected) => {
                self.bump();
                self.expect(TokenKind::LParen, "'('")?;
                let a = self.path_tpl()?;
                self.expect(TokenKind::Comma, "','")?;
                let b = self.path_tpl()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(PropertyTpl::Connected { a, b })
            }
            TokenKind::Keyword(Keyword::AttrSum) => {
                self.bump();
                self.expect(TokenKind::LParen, "'('")?;
                let attribute = self.word_tpl("attribute name")?;
                self.expect(TokenKind::RParen, "')'")?;
                self.expect(TokenKind::Le, "'<='")?;
                let bound = match &self.peek().kind {
                    TokenKind::Number(v) => {
                        let v = *v;
                        self.bump();
                        NumTpl::Lit(v)
                    }
                    TokenKind::Template(s)
                        if s.starts_with('$') && !s[1..].is_empty() && !s[1..].contains('$') =>
                    {
                        let name = s[1..].to_string();
                        self.bump();
                        NumTpl::Param(name)
                    }
                    _ => return self.fail(&["number", "'$param'"]),
                };
                Ok(PropertyTpl::AttrSum { attribute, bound })
            }
            _ => self.fail(&[
                "'allPortsConnected'",
                "'typeClosed'",
                "'exists'",
                "'replication'",
                "'connected'",
                "'attrSum'",
            ]),
        }
    }

    /// Pattern-level invariants: non-empty action list, unique fragment
    /// element names, include targets resolvable, and every placeholder
    /// declared (`$type` is reserved for fragment port/role positions).
    fn validate_pattern(&self, pattern: &QoSPattern, header: &Token) -> Result<(), ParseError> {
        let fail = |message: String| -> ParseError {
            ParseError::Invalid {
                line: header.line,
                col: header.col,
                message,
            }
        };
        if pattern.actions.is_empty() {
            return Err(fail(
                "empty pattern: at least one action is required".to_string(),
            ));
        }

        let declared: BTreeSet<&str> = pattern.params.iter().map(|p| p.name.as_str()).collect();
        let check = |raw: &str, allow_type: bool| -> Result<(), ParseError> {
            let names = placeholders_in(raw).map_err(&fail)?;
            for n in names {
                let reserved = allow_type && n == "type";
                if !reserved && !declared.contains(n.as_str()) {
                    return Err(fail(format!("undeclared placeholder ${n}")));
                }
            }
            Ok(())
        };
        let check_scalar = |s: &ScalarTpl| -> Result<(), ParseError> {
            if let ScalarTpl::Param(name) = s {
                if !declared.contains(name.as_str()) {
                    return Err(fail(format!("undeclared placeholder ${name}")));
                }
            }
            Ok(())
        };
        let check_int = |s: &IntTpl| -> Result<(), ParseError> {
            if let IntTpl::Param(name) = s {
                if !declared.contains(name.as_str()) {
                    return Err(fail(format!("undeclared placeholder ${name}")));
                }
            }
            Ok(())
        };
        let check_fragment = |f: &FragmentTpl| -> Result<(), ParseError> {
            for c in &f.components {
                check(&c.name.0, false)?;
                for p in &c.ports {
                    check(&p.name.0, true)?;
                    check(&p.message_type.0, true)?;
                }
                for (k, v) in &c.attributes {
                    check(&k.0, false)?;
                    check_scalar(v)?;
                }
            }
            for c in &f.connectors {
                check(&c.name.0, false)?;
                for r in &c.roles {
                    check(&r.name.0, true)?;
                    check(&r.message_type.0, true)?;
                }
                for (k, v) in &c.attributes {
                    check(&k.0, false)?;
                    check_scalar(v)?;
                }
            }
            for a in &f.attachments {
                for seg in a.from.0.iter().chain(a.to.0.iter()) {
                    check(&seg.0, false)?;
                }
            }
            Ok(())
        };

        let mut fragment_names: BTreeSet<String> = BTreeSet::new();
        for f in &pattern.fragments {
            check_fragment(f)?;
            for name in f.element_names() {
                if !fragment_names.insert(name.0.clone()) {
                    return Err(fail(format!("duplicate fragment element {name}")));
                }
            }
        }

        for action in &pattern.actions {
            match action {
                ActionTpl::Include { fragment } => {
                    check(&fragment.0, false)?;
                    if !fragment_names.contains(&fragment.0) {
                        return Err(fail(format!(
                            "include references unknown fragment element {fragment}"
                        )));
                    }
                }
                ActionTpl::Exclude { target } => {
                    for seg in &target.0 {
                        check(&seg.0, false)?;
                    }
                }
                ActionTpl::ExcludeType { type_name } => check(&type_name.0, false)?,
                ActionTpl::Replicate { target, count } => {
                    check(&target.0, false)?;
                    check_int(count)?;
                }
                ActionTpl::Unify {
                    element,
                    port,
                    connector,
                } => {
                    check(&element.0, false)?;
                    if let PortSelTpl::Named(p) = port {
                        check(&p.0, false)?;
                    }
                    check(&connector.0, false)?;
                }
                ActionTpl::Decompose {
                    target,
                    fragment,
                    port_map,
                } => {
                    check(&target.0, false)?;
                    check_fragment(fragment)?;
                    for (k, v) in port_map {
                        check(&k.0, false)?;
                        for seg in &v.0 {
                            check(&seg.0, false)?;
                        }
                    }
                }
            }
        }

        for ensure in &pattern.ensures {
            match ensure {
                PropertyTpl::AllPortsConnected | PropertyTpl::TypeClosed => {}
                PropertyTpl::Exists { pattern: p, .. } => check(&p.0, false)?,
                PropertyTpl::Replication { base, min } => {
                    check(&base.0, false)?;
                    check_int(min)?;
                }
                PropertyTpl::Connected { a, b } => {
                    for seg in a.0.iter().chain(b.0.iter()) {
                        check(&seg.0, false)?;
                    }
                }
                PropertyTpl::AttrSum { attribute, bound } => {
                    check(&attribute.0, false)?;
                    if let NumTpl::Param(name) = bound {
                        if !declared.contains(name.as_str()) {
                            return Err(fail(format!("undeclared placeholder ${name}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    // -----------------------------------------------------------------------
    // platform
    // -----------------------------------------------------------------------

    /// Concrete fragment body (no placeholders), shared by adapters and
    /// rewrite replacements. Message types are not resolved here; include
    /// adds them to the host model.
    fn fragment_concrete(&mut self) -> Result<Fragment, ParseError> {
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut fragment = Fragment::default();
        let any: BTreeSet<String> = BTreeSet::new();
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    break;
                }
                TokenKind::Keyword(Keyword::Component) => {
                    self.bump();
                    let c = self.component_unchecked(&any)?;
                    fragment.components.push(c);
                }
                TokenKind::Keyword(Keyword::Connector) => {
                    self.bump();
                    let c = self.connector_unchecked(&any)?;
                    fragment.connectors.push(c);
                }
                TokenKind::Keyword(Keyword::Attach) => {
                    self.bump();
                    let (from, _) = self.path()?;
                    self.expect_kw(Keyword::To)?;
                    let (to, _) = self.path()?;
                    fragment.attachments.push(Attachment::new(from, to));
                }
                _ => return self.fail(&["'component'", "'connector'", "'attach'", "'}'"]),
            }
        }
        if let Err(detail) = fragment.validate_isolated() {
            return self.invalid_here(detail);
        }
        for a in &fragment.attachments {
            for endpoint in [&a.from, &a.to] {
                if !fragment.element_names().any(|n| n == endpoint.head()) {
                    return self.invalid_here(format!(
                        "fragment attachment endpoint {endpoint} does not name a fragment element"
                    ));
                }
            }
        }
        Ok(fragment)
    }

    /// Component parser that skips the declared-type check (fragments may
    /// introduce new types).
    fn component_unchecked(&mut self, _types: &BTreeSet<String>) -> Result<Component, ParseError> {
        let (name, _) = self.ident("component name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut component = Component {
            name,
            ports: vec![],
            attributes: BTreeMap::new(),
        };
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return Ok(component);
                }
                TokenKind::Keyword(Keyword::Port) => {
                    self.bump();
                    let (name, t) = self.ident("port name")?;
                    self.expect(TokenKind::Colon, "':'")?;
                    let direction = if self.eat_kw(Keyword::Provides) {
                        PortDirection::Provides
                    } else if self.eat_kw(Keyword::Requires) {
                        PortDirection::Requires
                    } else {
                        return self.fail(&["'provides'", "'requires'"]);
                    };
                    let (message_type, _) = self.ident("message type")?;
                    if component.port(&name).is_some() {
                        return self.invalid(t.line, t.col, format!("duplicate port name {name}"));
                    }
                    component.ports.push(Port {
                        name,
                        direction,
                        message_type,
                    });
                }
                TokenKind::Keyword(Keyword::Attr) => {
                    self.bump();
                    let (key, t) = self.ident("attribute name")?;
                    self.expect(TokenKind::Eq, "'='")?;
                    let value = self.scalar()?;
                    if component.attributes.insert(key.clone(), value).is_some() {
                        return self.invalid(t.line, t.col, format!("duplicate attribute {key}"));
                    }
                }
                _ => return self.fail(&["'port'", "'attr'", "'}'"]),
            }
        }
    }

    fn connector_unchecked(&mut self, _types: &BTreeSet<String>) -> Result<Connector, ParseError> {
        let (name, _) = self.ident("connector name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut connector = Connector {
            name,
            roles: vec![],
            attributes: BTreeMap::new(),
        };
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return Ok(connector);
                }
                TokenKind::Keyword(Keyword::Role) => {
                    self.bump();
                    let (name, t) = self.ident("role name")?;
                    self.expect(TokenKind::Colon, "':'")?;
                    let direction = if self.eat_kw(Keyword::Accepts) {
                        RoleDirection::Accepts
                    } else if self.eat_kw(Keyword::Emits) {
                        RoleDirection::Emits
                    } else {
                        return self.fail(&["'accepts'", "'emits'"]);
                    };
                    let (message_type, _) = self.ident("message type")?;
                    if connector.role(&name).is_some() {
                        return self.invalid(t.line, t.col, format!("duplicate role name {name}"));
                    }
                    connector.roles.push(Role {
                        name,
                        direction,
                        message_type,
                    });
                }
                TokenKind::Keyword(Keyword::Attr) => {
                    self.bump();
                    let (key, t) = self.ident("attribute name")?;
                    self.expect(TokenKind::Eq, "'='")?;
                    let value = self.scalar()?;
                    if connector.attributes.insert(key.clone(), value).is_some() {
                        return self.invalid(t.line, t.col, format!("duplicate attribute {key}"));
                    }
                }
                _ => return self.fail(&["'role'", "'attr'", "'}'"]),
            }
        }
    }

    fn platform(&mut self) -> Result<PlatformModel, ParseError> {
        let (name, _) = self.ident("platform name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut platform = PlatformModel {
            name,
            requires: vec![],
            adapters: vec![],
            rewrites: vec![],
        };
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    break;
                }
                TokenKind::Keyword(Keyword::Requires) => {
                    self.bump();
                    platform.requires.push(self.property_expr()?);
                }
                TokenKind::Keyword(Keyword::Adapter) => {
                    let at = self.bump();
                    let fragment = self.fragment_concrete()?;
                    if fragment.element_count() != 1 || !fragment.attachments.is_empty() {
                        return self.invalid(
                            at.line,
                            at.col,
                            "adapter must declare exactly one component or connector",
                        );
                    }
                    platform.adapters.push(fragment);
                }
                TokenKind::Keyword(Keyword::Rewrite) => {
                    let at = self.bump();
                    let kind = self.element_kind()?;
                    let pattern = self.glob("element name or glob")?;
                    self.expect(TokenKind::Arrow, "'->'")?;
                    self.expect_kw(Keyword::Fragment)?;
                    let replacement = self.fragment_concrete()?;
                    self.expect_kw(Keyword::Portmap)?;
                    self.expect(TokenKind::LBrace, "'{'")?;
                    let mut port_map = BTreeMap::new();
                    while !matches!(self.peek().kind, TokenKind::RBrace) {
                        let (key, kt) = self.ident("port or role name")?;
                        self.expect(TokenKind::Arrow, "'->'")?;
                        let (path, pt) = self.path()?;
                        if path.segments.len() != 2 {
                            return self.invalid(
                                pt.line,
                                pt.col,
                                format!("portmap path {path} must be element::port"),
                            );
                        }
                        if !replacement.element_names().any(|n| n == path.head()) {
                            return self.invalid(
                                pt.line,
                                pt.col,
                                format!("portmap path {path} does not name a replacement element"),
                            );
                        }
                        if port_map.insert(key.clone(), path).is_some() {
                            return self.invalid(
                                kt.line,
                                kt.col,
                                format!("duplicate portmap key {key}"),
                            );
                        }
                        if matches!(self.peek().kind, TokenKind::Semi) {
                            self.bump();
                        }
                    }
                    self.bump();
                    if platform
                        .rewrites
                        .iter()
                        .any(|r| r.kind == kind && r.pattern == pattern)
                    {
                        return self.invalid(
                            at.line,
                            at.col,
                            format!("duplicate rewrite key {kind} {pattern}"),
                        );
                    }
                    platform.rewrites.push(RewriteRule {
                        kind,
                        pattern,
                        replacement,
                        port_map,
                    });
                }
                _ => return self.fail(&["'requires'", "'adapter'", "'rewrite'", "'}'"]),
            }
        }
        Ok(platform)
    }

    // -----------------------------------------------------------------------
    // mapping
    // -----------------------------------------------------------------------

    fn mapping(&mut self) -> Result<MappingModel, ParseError> {
        let (name, _) = self.ident("mapping name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut mapping = MappingModel {
            name,
            manifest_name: "manifest.txt".to_string(),
            strict: false,
            rules: vec![],
        };
        let mut saw_manifest = false;
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    break;
                }
                TokenKind::Keyword(Keyword::Manifest) => {
                    let at = self.bump();
                    let (name, _) = self.string()?;
                    if saw_manifest {
                        return self.invalid(at.line, at.col, "duplicate manifest declaration");
                    }
                    saw_manifest = true;
                    mapping.manifest_name = name;
                }
                TokenKind::Keyword(Keyword::Strict) => {
                    let at = self.bump();
                    if mapping.strict {
                        return self.invalid(at.line, at.col, "duplicate strict declaration");
                    }
                    mapping.strict = true;
                }
                TokenKind::Keyword(Keyword::Rule) => {
                    self.bump();
                    let kind = self.element_kind()?;
                    let pattern = self.glob("element name or glob")?;
                    self.expect(TokenKind::Arrow, "'->'")?;
                    let (output_path, pt) = self.string()?;
                    match template_placeholders(&output_path) {
                        Err(detail) => {
                            return self.invalid(pt.line, pt.col, format!("output path: {detail}"))
                        }
                        Ok(names) => {
                            if !names.iter().any(|n| n == "name") {
                                return self.invalid(
                                    pt.line,
                                    pt.col,
                                    "output path must contain {name}",
                                );
                            }
                            if let Some(bad) = names.iter().find(|n| n.as_str() != "name") {
                                return self.invalid(
                                    pt.line,
                                    pt.col,
                                    format!("unknown placeholder {{{bad}}} in output path"),
                                );
                            }
                        }
                    }
                    self.expect_kw(Keyword::Template)?;
                    let (template, tt) = self.string()?;
                    match template_placeholders(&template) {
                        Err(detail) => {
                            return self.invalid(tt.line, tt.col, format!("template: {detail}"))
                        }
                        Ok(names) => {
                            if let Some(bad) = names
                                .iter()
                                .find(|n| !TEMPLATE_PLACEHOLDERS.contains(&n.as_str()))
                            {
                                return self.invalid(
                                    tt.line,
                                    tt.col,
                                    format!("unknown placeholder {{{bad}}} in template"),
                                );
                            }
                        }
                    }
                    mapping.rules.push(MappingRule {
                        kind,
                        pattern,
                        output_path,
                        template,
                    });
                }
                _ => return self.fail(&["'manifest'", "'strict'", "'rule'", "'}'"]),
            }
        }
        Ok(mapping)
    }

    // -----------------------------------------------------------------------
    // resources
    // -----------------------------------------------------------------------

    fn resources(&mut self) -> Result<ResourceModel, ParseError> {
        let (name, _) = self.ident("resource model name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut resources = ResourceModel {
            name,
            nodes: vec![],
        };
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return Ok(resources);
                }
                TokenKind::Keyword(Keyword::Node) => {
                    self.bump();
                    let (name, nt) = self.ident("node name")?;
                    if resources.nodes.iter().any(|n| n.name == name) {
                        return self.invalid(
                            nt.line,
                            nt.col,
                            format!("duplicate node name {name}"),
                        );
                    }
                    self.expect(TokenKind::LBrace, "'{'")?;
                    self.expect_kw(Keyword::Capacity)?;
                    let (capacity, ct) = self.number()?;
                    if capacity <= 0.0 {
                        return self.invalid(
                            ct.line,
                            ct.col,
                            format!("capacity must be > 0, got {capacity}"),
                        );
                    }
                    let mut attributes = BTreeMap::new();
                    loop {
                        match &self.peek().kind {
                            TokenKind::RBrace => {
                                self.bump();
                                break;
                            }
                            TokenKind::Keyword(Keyword::Attr) => {
                                self.bump();
                                let (key, t) = self.ident("attribute name")?;
                                self.expect(TokenKind::Eq, "'='")?;
                                let value = self.scalar()?;
                                if attributes.insert(key.clone(), value).is_some() {
                                    return self.invalid(
                                        t.line,
                                        t.col,
                                        format!("duplicate attribute {key}"),
                                    );
                                }
                            }
                            _ => return self.fail(&["'attr'", "'}'"]),
                        }
                    }
                    resources.nodes.push(ResourceNode {
                        name,
                        capacity,
                        attributes,
                    });
                }
                _ => return self.fail(&["'node'", "'}'"]),
            }
        }
    }
}
