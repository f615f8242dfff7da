//! Owned syntax trees and per-file abstract contexts.
//!
//! Parsing goes through tree-sitter when the `parsing` feature is enabled. The
//! resulting tree is copied into plain [`SyntaxNode`] values so the rest of the
//! crate (and callers on targets without a C toolchain) can work with trees
//! without touching the parser.

mod declarations;

pub use declarations::{
    declaration_table, extract_abstract, list_declaration_nodes, AbstractContext, DeclarationTable,
};

use crate::corpus::Cursor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxNode {
    /// Grammar node-kind name.
    pub kind: &'static str,
    /// Field name this node occupies in its parent, if any.
    pub field: Option<&'static str>,
    pub is_named: bool,
    pub start: Cursor,
    pub end: Cursor,
    pub byte_span: (usize, usize),
    pub children: Vec<SyntaxNode>,
}

impl SyntaxNode {
    pub fn child_by_field(&self, field: &str) -> Option<&SyntaxNode> {
        self.children.iter().find(|c| c.field == Some(field))
    }

    pub fn named_children(&self) -> impl Iterator<Item = &SyntaxNode> {
        self.children.iter().filter(|c| c.is_named)
    }

    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.byte_span.0..self.byte_span.1]
    }

    pub fn is_empty(&self) -> bool {
        self.byte_span.0 == self.byte_span.1
    }

    /// Pre-order traversal including `self`.
    pub fn descendants(&self) -> Descendants<'_> {
        Descendants { stack: vec![self] }
    }
}

pub struct Descendants<'a> {
    stack: Vec<&'a SyntaxNode>,
}

impl<'a> Iterator for Descendants<'a> {
    type Item = &'a SyntaxNode;

    fn next(&mut self) -> Option<&'a SyntaxNode> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxTree {
    pub root: SyntaxNode,
    pub file_path: String,
    pub had_parse_errors: bool,
}

#[cfg(feature = "parsing")]
pub use parser::{parse_file, SourceParser};

#[cfg(feature = "parsing")]
mod parser {
    use super::{SyntaxNode, SyntaxTree};
    use crate::corpus::{Language, SourceFile};
    use crate::error::{Error, Result};
    use std::sync::OnceLock;

    /// A reusable parser. Not shareable across threads; keep one per worker.
    pub struct SourceParser {
        parser: tree_sitter::Parser,
    }

    impl Default for SourceParser {
        fn default() -> Self {
            Self::new()
        }
    }

    /// Node-kind and field names of one grammar, copied once into leaked
    /// storage so trees can carry `&'static str` names.
    struct Names {
        kinds: Vec<&'static str>,
        fields: Vec<Option<&'static str>>,
    }

    impl Names {
        fn of(lang: &tree_sitter::Language) -> Names {
            let leak = |s: &str| -> &'static str { Box::leak(s.to_owned().into_boxed_str()) };
            let kinds = (0..lang.node_kind_count())
                .map(|id| leak(lang.node_kind_for_id(id as u16).unwrap_or("")))
                .collect();
            let fields = (0..=lang.field_count())
                .map(|id| lang.field_name_for_id(id as u16).map(leak))
                .collect();
            Names { kinds, fields }
        }
    }

    fn grammar(file: &SourceFile) -> (tree_sitter::Language, &'static Names) {
        static NAMES: [OnceLock<Names>; 5] = [const { OnceLock::new() }; 5];
        let (slot, lang): (usize, tree_sitter::Language) = match file.language {
            Language::Python => (0, tree_sitter_python::LANGUAGE.into()),
            Language::Java => (1, tree_sitter_java::LANGUAGE.into()),
            Language::TypeScript if file.path.to_ascii_lowercase().ends_with(".tsx") => {
                (2, tree_sitter_typescript::LANGUAGE_TSX.into())
            }
            Language::TypeScript => (3, tree_sitter_typescript::LANGUAGE_TYPESCRIPT.into()),
            Language::CSharp => (4, tree_sitter_c_sharp::LANGUAGE.into()),
        };
        let names = NAMES[slot].get_or_init(|| Names::of(&lang));
        (lang, names)
    }

    impl SourceParser {
        pub fn new() -> Self {
            SourceParser {
                parser: tree_sitter::Parser::new(),
            }
        }

        /// Parses `file`. Syntax errors do not fail the parse; they set
        /// `had_parse_errors` and leave ERROR nodes in the tree.
        pub fn parse(&mut self, file: &SourceFile) -> Result<SyntaxTree> {
            let (lang, names) = grammar(file);
            self.parser
                .set_language(&lang)
                .map_err(|_| Error::UnsupportedLanguage(file.path.clone()))?;
            let tree = self
                .parser
                .parse(&file.text, None)
                .ok_or_else(|| Error::Parse(file.path.clone()))?;
            let had_parse_errors = tree.root_node().has_error();
            let mut root = convert(&tree, file, names);
            root.byte_span = (0, file.text.len());
            root.start = file.position_of(0);
            root.end = file.position_of(file.text.len());
            Ok(SyntaxTree {
                root,
                file_path: file.path.clone(),
                had_parse_errors,
            })
        }
    }

    pub fn parse_file(file: &SourceFile) -> Result<SyntaxTree> {
        SourceParser::new().parse(file)
    }

    fn make(cursor: &tree_sitter::TreeCursor<'_>, file: &SourceFile, names: &Names) -> SyntaxNode {
        let node = cursor.node();
        let span = (node.start_byte(), node.end_byte());
        SyntaxNode {
            kind: names.kinds.get(node.kind_id() as usize).copied().unwrap_or("ERROR"),
            field: cursor
                .field_id()
                .and_then(|id| names.fields.get(id.get() as usize).copied().flatten()),
            is_named: node.is_named(),
            start: file.position_of(span.0),
            end: file.position_of(span.1),
            byte_span: span,
            children: Vec::with_capacity(node.child_count() as usize),
        }
    }

    // Iterative so deeply nested files cannot overflow the stack.
    fn convert(tree: &tree_sitter::Tree, file: &SourceFile, names: &Names) -> SyntaxNode {
        let mut cursor = tree.walk();
        let mut stack = vec![make(&cursor, file, names)];
        loop {
            if cursor.goto_first_child() {
                stack.push(make(&cursor, file, names));
                continue;
            }
            loop {
                if stack.len() == 1 {
                    return stack.pop().expect("root");
                }
                let done = stack.pop().expect("child");
                stack.last_mut().expect("parent").children.push(done);
                if cursor.goto_next_sibling() {
                    stack.push(make(&cursor, file, names));
                    break;
                }
                cursor.goto_parent();
            }
        }
    }

}
