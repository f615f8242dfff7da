//! Declaration listing and abstract-context rendering.
//!
//! An abstract keeps the definition-level view of a file: container headers
//! up to their opening delimiter, function signatures without bodies, and the
//! leading line of top-level variable and field declarations. Everything
//! inside a function body is ignored, as are comments and blank lines.
//! Every emitted line is a prefix of a line of the original file, with
//! trailing whitespace trimmed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{SyntaxNode, SyntaxTree};
use crate::corpus::{Language, SourceFile};
use crate::pool::ContextKind;

/// Node-kind tables for one grammar.
#[derive(Debug)]
pub struct DeclarationTable {
    /// Declarations with a member body; their `body` children are scanned
    /// for nested declarations.
    pub containers: &'static [&'static str],
    /// Rendered as a signature; never descended into.
    pub functions: &'static [&'static str],
    /// Rendered when they appear at file level or directly in a container
    /// body.
    pub variables: &'static [&'static str],
    /// Required named child for a variable node to count (Python assignment
    /// statements are `expression_statement` nodes).
    pub variable_child: Option<&'static str>,
    /// Transparent nodes: their children keep the parent's level, and the
    /// rendered range of the wrapped declaration starts at the wrapper.
    pub wrappers: &'static [&'static str],
    /// Groups of members inside a container body (Java's enum body
    /// declarations), treated as part of the body.
    pub member_groups: &'static [&'static str],
    /// Function-valued expressions. Never descended into; a variable whose
    /// value is one of these is cut at the expression's body.
    pub function_values: &'static [&'static str],
    pub comments: &'static [&'static str],
}

static PYTHON: DeclarationTable = DeclarationTable {
    containers: &["class_definition"],
    functions: &["function_definition"],
    variables: &["expression_statement"],
    variable_child: Some("assignment"),
    wrappers: &["decorated_definition"],
    member_groups: &[],
    function_values: &["lambda"],
    comments: &["comment"],
};

static JAVA: DeclarationTable = DeclarationTable {
    containers: &[
        "class_declaration",
        "interface_declaration",
        "enum_declaration",
        "record_declaration",
        "annotation_type_declaration",
    ],
    functions: &[
        "method_declaration",
        "constructor_declaration",
        "compact_constructor_declaration",
        "annotation_type_element_declaration",
    ],
    variables: &["field_declaration", "constant_declaration", "enum_constant"],
    variable_child: None,
    wrappers: &[],
    member_groups: &["enum_body_declarations"],
    function_values: &["lambda_expression"],
    comments: &["line_comment", "block_comment"],
};

static TYPESCRIPT: DeclarationTable = DeclarationTable {
    containers: &[
        "class_declaration",
        "abstract_class_declaration",
        "interface_declaration",
        "enum_declaration",
        "internal_module",
        "module",
    ],
    functions: &[
        "function_declaration",
        "generator_function_declaration",
        "function_signature",
        "method_definition",
        "method_signature",
        "abstract_method_signature",
    ],
    variables: &[
        "lexical_declaration",
        "variable_declaration",
        "public_field_definition",
        "property_signature",
        "type_alias_declaration",
        "enum_assignment",
        "property_identifier",
    ],
    variable_child: None,
    wrappers: &["export_statement", "expression_statement", "ambient_declaration"],
    member_groups: &[],
    function_values: &[
        "arrow_function",
        "function_expression",
        "function",
        "generator_function",
    ],
    comments: &["comment"],
};

static CSHARP: DeclarationTable = DeclarationTable {
    containers: &[
        "class_declaration",
        "struct_declaration",
        "interface_declaration",
        "enum_declaration",
        "record_declaration",
        "record_struct_declaration",
        "namespace_declaration",
    ],
    functions: &[
        "method_declaration",
        "constructor_declaration",
        "destructor_declaration",
        "operator_declaration",
        "conversion_operator_declaration",
        "indexer_declaration",
        "delegate_declaration",
    ],
    variables: &[
        "field_declaration",
        "property_declaration",
        "event_field_declaration",
        "event_declaration",
        "file_scoped_namespace_declaration",
        "enum_member_declaration",
    ],
    variable_child: None,
    wrappers: &[],
    member_groups: &[],
    function_values: &["lambda_expression", "anonymous_method_expression"],
    comments: &["comment"],
};

pub fn declaration_table(language: Language) -> &'static DeclarationTable {
    match language {
        Language::Python => &PYTHON,
        Language::Java => &JAVA,
        Language::TypeScript => &TYPESCRIPT,
        Language::CSharp => &CSHARP,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Container,
    Function,
    Variable,
}

struct Declaration<'t> {
    node: &'t SyntaxNode,
    role: Role,
    /// Start of the rendered range; earlier than the node for decorated
    /// Python definitions.
    start: usize,
}

impl DeclarationTable {
    fn is_variable(&self, node: &SyntaxNode) -> bool {
        self.variables.contains(&node.kind)
            && self
                .variable_child
                .is_none_or(|kind| node.named_children().next().is_some_and(|c| c.kind == kind))
    }

    fn role(&self, node: &SyntaxNode) -> Option<Role> {
        if self.functions.contains(&node.kind) {
            Some(Role::Function)
        } else if self.containers.contains(&node.kind) {
            Some(Role::Container)
        } else if self.is_variable(node) {
            Some(Role::Variable)
        } else {
            None
        }
    }
}

fn collect<'t>(tree: &'t SyntaxTree, table: &DeclarationTable) -> Vec<Declaration<'t>> {
    let mut out = Vec::new();
    for child in tree.root.named_children() {
        visit(child, true, None, table, &mut out);
    }
    out
}

/// `top_level` is true for nodes sitting directly at file level or in a
/// container body, which is where variable declarations count.
fn visit<'t>(
    node: &'t SyntaxNode,
    top_level: bool,
    decorated_from: Option<usize>,
    table: &DeclarationTable,
    out: &mut Vec<Declaration<'t>>,
) {
    if !node.is_named || table.comments.contains(&node.kind) || table.function_values.contains(&node.kind) {
        return;
    }
    let start = decorated_from.unwrap_or(node.byte_span.0);
    match table.role(node) {
        Some(Role::Function) => out.push(Declaration {
            node,
            role: Role::Function,
            start,
        }),
        Some(Role::Container) => {
            out.push(Declaration {
                node,
                role: Role::Container,
                start,
            });
            if let Some(body) = node.child_by_field("body") {
                visit_members(body, table, out);
            }
        }
        Some(Role::Variable) => {
            if top_level {
                out.push(Declaration {
                    node,
                    role: Role::Variable,
                    start,
                });
            }
        }
        None if table.wrappers.contains(&node.kind) => {
            for child in node.named_children() {
                visit(child, top_level, Some(node.byte_span.0), table, out);
            }
        }
        None => {
            for child in node.named_children() {
                visit(child, false, None, table, out);
            }
        }
    }
}

fn visit_members<'t>(body: &'t SyntaxNode, table: &DeclarationTable, out: &mut Vec<Declaration<'t>>) {
    for member in body.named_children() {
        if table.member_groups.contains(&member.kind) {
            visit_members(member, table, out);
        } else {
            visit(member, true, None, table, out);
        }
    }
}

/// Declaration nodes of `tree` in document order. Declarations nested in
/// containers are included; anything inside a function body is not.
pub fn list_declaration_nodes(tree: &SyntaxTree, language: Language) -> Vec<&SyntaxNode> {
    collect(tree, declaration_table(language))
        .into_iter()
        .map(|d| d.node)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractContext {
    pub file_path: String,
    pub text: String,
    pub declaration_count: usize,
    pub source_kind: ContextKind,
}

fn is_name_kind(kind: &str) -> bool {
    kind.ends_with("identifier") || kind == "identifier"
}

fn is_annotation_like(kind: &str) -> bool {
    ["annotation", "attribute", "decorator", "modifier"]
        .iter()
        .any(|word| kind.contains(word))
}

/// First node (pre-order) that names the declaration, skipping annotation
/// and modifier subtrees.
fn first_name(node: &SyntaxNode) -> Option<&SyntaxNode> {
    let mut stack: Vec<&SyntaxNode> = node.children.iter().rev().collect();
    while let Some(n) = stack.pop() {
        if is_annotation_like(n.kind) {
            continue;
        }
        if n.is_named && is_name_kind(n.kind) {
            return Some(n);
        }
        stack.extend(n.children.iter().rev());
    }
    None
}

fn header_end(decl: &Declaration<'_>, file: &SourceFile, table: &DeclarationTable) -> usize {
    let node = decl.node;
    match decl.role {
        Role::Container => match node.child_by_field("body") {
            Some(body) if file.text.as_bytes().get(body.byte_span.0) == Some(&b'{') => body.byte_span.0 + 1,
            Some(body) => body.byte_span.0,
            None => node.byte_span.1,
        },
        Role::Function => node
            .child_by_field("body")
            .map_or(node.byte_span.1, |body| body.byte_span.0),
        Role::Variable => {
            let function_value = node
                .descendants()
                .skip(1)
                .find(|n| table.function_values.contains(&n.kind));
            if let Some(body) = function_value.and_then(|f| f.child_by_field("body")) {
                return body.byte_span.0;
            }
            let line = first_name(node).map_or(node.start.line, |n| n.start.line);
            let idx = line - 1;
            let line_end = file.line_offsets[idx] + file.lines[idx].len();
            node.byte_span.1.min(line_end)
        }
    }
}

fn line_index(file: &SourceFile, offset: usize) -> usize {
    file.line_offsets
        .partition_point(|&start| start <= offset)
        .saturating_sub(1)
}

/// Renders the abstract context of `file` from its syntax tree.
pub fn extract_abstract(tree: &SyntaxTree, file: &SourceFile) -> AbstractContext {
    let table = declaration_table(file.language);
    let decls = collect(tree, table);

    // line index -> absolute byte offset up to which the line is kept
    let mut kept: BTreeMap<usize, usize> = BTreeMap::new();
    for decl in &decls {
        let end = header_end(decl, file, table);
        let first = line_index(file, decl.start);
        let last = line_index(file, end.max(decl.start));
        for idx in first..=last {
            let line_end = file.line_offsets[idx] + file.lines[idx].len();
            let cut = if idx == last { end.min(line_end) } else { line_end };
            let entry = kept.entry(idx).or_insert(cut);
            *entry = (*entry).max(cut);
        }
    }

    let mut comments: Vec<(usize, usize)> = tree
        .root
        .descendants()
        .filter(|n| table.comments.contains(&n.kind))
        .map(|n| n.byte_span)
        .collect();
    comments.sort_unstable();

    let mut text = String::new();
    for (idx, cut) in kept {
        let line_start = file.line_offsets[idx];
        let line = &file.lines[idx];
        let Some(first) = line[..cut - line_start].find(|c: char| !c.is_whitespace()) else {
            continue;
        };
        let first = line_start + first;
        if comments.iter().any(|&(s, e)| s <= first && first < e) {
            continue;
        }
        let cut = comments
            .iter()
            .map(|&(s, _)| s)
            .find(|&s| s > first && s < cut)
            .unwrap_or(cut);
        let rendered = line[..cut - line_start].trim_end();
        if rendered.is_empty() {
            continue;
        }
        text.push_str(rendered);
        text.push('\n');
    }

    AbstractContext {
        file_path: file.path.clone(),
        text,
        declaration_count: decls.len(),
        source_kind: ContextKind::Abstract,
    }
}
