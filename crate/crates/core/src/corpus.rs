//! Loading a repository from disk into memory.
//!
//! A [`Repository`] is immutable once loaded. Files are kept as raw text plus a
//! line table so cursor arithmetic can go back and forth between
//! `(line, column)` positions and byte offsets without re-scanning.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Java,
    TypeScript,
    CSharp,
}

impl Language {
    pub const ALL: [Language; 4] = [
        Language::Python,
        Language::Java,
        Language::TypeScript,
        Language::CSharp,
    ];

    pub fn comment_prefix(self) -> &'static str {
        match self {
            Language::Python => "#",
            Language::Java | Language::TypeScript | Language::CSharp => "//",
        }
    }

    pub fn extensions(self) -> &'static [&'static str] {
        match self {
            Language::Python => &["py"],
            Language::Java => &["java"],
            Language::TypeScript => &["ts", "tsx"],
            Language::CSharp => &["cs"],
        }
    }

    /// Human-readable name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Language::Python => "Python",
            Language::Java => "Java",
            Language::TypeScript => "TypeScript",
            Language::CSharp => "C#",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Language> {
        let ext = ext.to_ascii_lowercase();
        Language::ALL
            .into_iter()
            .find(|lang| lang.extensions().contains(&ext.as_str()))
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Returns the language whose extension table contains the suffix of `path`.
/// The comparison ignores ASCII case.
pub fn detect_language(path: impl AsRef<Path>) -> Option<Language> {
    let ext = path.as_ref().extension()?.to_str()?;
    Language::from_extension(ext)
}

/// A position in a file: 1-based line, 0-based character column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cursor {
    pub line: usize,
    pub column: usize,
}

impl Cursor {
    pub fn new(line: usize, column: usize) -> Self {
        Cursor { line, column }
    }
}

impl fmt::Display for Cursor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub language: Language,
    pub text: String,
    /// Lines without their terminators. A `\r` before `\n` is stripped here
    /// but still counted by `line_offsets`.
    pub lines: Vec<String>,
    pub line_offsets: Vec<usize>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, language: Language, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut lines = Vec::new();
        let mut line_offsets = Vec::new();
        let mut start = 0;
        for (i, byte) in text.bytes().enumerate() {
            if byte == b'\n' {
                let raw = &text[start..i];
                lines.push(raw.strip_suffix('\r').unwrap_or(raw).to_string());
                line_offsets.push(start);
                start = i + 1;
            }
        }
        if start < text.len() || lines.is_empty() {
            lines.push(text[start..].to_string());
            line_offsets.push(start);
        }
        SourceFile {
            path: path.into(),
            language,
            text,
            lines,
            line_offsets,
        }
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// 1-based line accessor.
    pub fn line(&self, line: usize) -> Option<&str> {
        line.checked_sub(1)
            .and_then(|idx| self.lines.get(idx))
            .map(String::as_str)
    }

    fn ends_with_newline(&self) -> bool {
        self.text.ends_with('\n')
    }

    /// Byte offset of the character at `cursor`.
    ///
    /// Besides every character position of every line (including the position
    /// just past the last character), the line following a trailing newline is
    /// addressable at column 0 and maps to the end of the text.
    pub fn locate_cursor(&self, cursor: Cursor) -> Result<usize> {
        let out_of_range = || Error::CursorOutOfRange {
            path: self.path.clone(),
            line: cursor.line,
            column: cursor.column,
        };
        if cursor.line == self.lines.len() + 1 && cursor.column == 0 && self.ends_with_newline() {
            return Ok(self.text.len());
        }
        let idx = cursor.line.checked_sub(1).ok_or_else(out_of_range)?;
        let line = self.lines.get(idx).ok_or_else(out_of_range)?;
        let within = if cursor.column == 0 {
            0
        } else {
            match line.char_indices().nth(cursor.column) {
                Some((byte, _)) => byte,
                None if line.chars().count() == cursor.column => line.len(),
                None => return Err(out_of_range()),
            }
        };
        Ok(self.line_offsets[idx] + within)
    }

    /// Inverse of [`SourceFile::locate_cursor`] for offsets on character
    /// boundaries. Offsets that land on a line terminator map to the end of
    /// that line.
    pub fn position_of(&self, offset: usize) -> Cursor {
        let offset = offset.min(self.text.len());
        if offset == self.text.len() && self.ends_with_newline() {
            return Cursor::new(self.lines.len() + 1, 0);
        }
        let idx = self
            .line_offsets
            .partition_point(|&start| start <= offset)
            .saturating_sub(1);
        let start = self.line_offsets[idx];
        let line = &self.lines[idx];
        let within = (offset - start).min(line.len());
        let column = line
            .get(..within)
            .map(|s| s.chars().count())
            .unwrap_or_else(|| line.char_indices().take_while(|(b, _)| *b < within).count());
        Cursor::new(idx + 1, column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadWarning {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Directory names skipped anywhere in the tree. Hidden directories are
    /// always skipped.
    pub excluded_dirs: Vec<String>,
    /// Inclusive bounds on the number of source files.
    pub file_bounds: Option<(usize, usize)>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            excluded_dirs: ["node_modules", "bin", "obj"]
                .into_iter()
                .map(String::from)
                .collect(),
            file_bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repository {
    pub root: PathBuf,
    pub id: String,
    pub files: Vec<SourceFile>,
    pub language_counts: BTreeMap<Language, usize>,
    pub warnings: Vec<LoadWarning>,
}

impl Repository {
    /// Builds a repository from in-memory files. Files are sorted by path;
    /// later duplicates of a path are dropped.
    pub fn from_files(id: impl Into<String>, root: impl Into<PathBuf>, mut files: Vec<SourceFile>) -> Self {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        files.dedup_by(|b, a| a.path == b.path);
        let mut language_counts = BTreeMap::new();
        for file in &files {
            *language_counts.entry(file.language).or_insert(0) += 1;
        }
        Repository {
            root: root.into(),
            id: id.into(),
            files,
            language_counts,
            warnings: Vec::new(),
        }
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files
            .binary_search_by(|f| f.path.as_str().cmp(path))
            .ok()
            .map(|idx| &self.files[idx])
    }
}

pub fn load_repository(root: impl AsRef<Path>, options: &LoadOptions) -> Result<Repository> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::RootNotFound(root.to_path_buf()));
    }
    let root = root.canonicalize()?;
    let id = root
        .file_name()
        .map(|name| name.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let walker = WalkDir::new(&root).sort_by_file_name().into_iter().filter_entry(|entry| {
        if entry.depth() == 0 || !entry.file_type().is_dir() {
            return true;
        }
        let name = entry.file_name().to_string_lossy();
        !name.starts_with('.') && !options.excluded_dirs.iter().any(|ex| *ex == name)
    });

    for entry in walker {
        let entry = match entry {
            Ok(entry) => entry,
            Err(err) => {
                let path = err.path().map(|p| p.display().to_string()).unwrap_or_default();
                log::warn!("skipping {path}: {err}");
                warnings.push(LoadWarning {
                    path,
                    message: err.to_string(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(language) = detect_language(entry.path()) else {
            continue;
        };
        let rel = relative_path(&root, entry.path());
        match std::fs::read(entry.path()) {
            Ok(bytes) => {
                let text = String::from_utf8_lossy(&bytes).into_owned();
                files.push(SourceFile::new(rel, language, text));
            }
            Err(err) => {
                log::warn!("skipping {rel}: {err}");
                warnings.push(LoadWarning {
                    path: rel,
                    message: err.to_string(),
                });
            }
        }
    }

    if let Some((min, max)) = options.file_bounds {
        if files.len() < min || files.len() > max {
            return Err(Error::FileCountOutOfBounds {
                count: files.len(),
                min,
                max,
            });
        }
    }

    let mut repo = Repository::from_files(id, root, files);
    repo.warnings = warnings;
    Ok(repo)
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}
