//! Online log template mining with a fixed-depth prefix tree.
//!
//! Each raw log is reduced to a template of constant tokens and wildcards
//! plus the ordered list of parameter values that filled the wildcards.
//! The tree is keyed on token count, then on leading tokens; leaves hold
//! clusters compared by token-wise similarity.
//!
//! Digit-bearing tokens are masked to wildcards before they ever touch the
//! tree, so `blk_5142679`, `67108864` and `/10.251.42.9` group immediately.
//! A leading `/` is kept as template text (`/<*>`) with the remainder as the
//! parameter value.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};


/// One position of a template: fixed text, or a wildcard with an optional
/// constant prefix (`<*>` or `/<*>`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateToken {
    Constant(String),
    Wildcard { prefix: String },
}

impl TemplateToken {
    pub fn is_wildcard(&self) -> bool {
        matches!(self, TemplateToken::Wildcard { .. })
    }

    /// Key used for tree descent and similarity comparison.
    fn key(&self) -> String {
        match self {
            TemplateToken::Constant(c) => c.clone(),
            TemplateToken::Wildcard { prefix } => format!("{prefix}<*>"),
        }
    }
}

impl fmt::Display for TemplateToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateToken::Constant(c) => f.write_str(c),
            TemplateToken::Wildcard { prefix } => write!(f, "{prefix}<*>"),
        }
    }
}

/// A mined template: the constant skeleton of a group of logs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: usize,
    pub tokens: Vec<TemplateToken>,
}

impl Template {
    pub fn wildcard_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_wildcard()).count()
    }

    pub fn render(&self) -> String {
        self.tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
    }
}

/// One log resolved against its template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLog {
    pub log_id: usize,
    pub template_id: usize,
    pub parameters: Vec<String>,
}

/// Tree parameters. `depth` counts the root and the token-count level, so
/// `depth - 2` leading tokens key the internal levels.
#[derive(Debug, Clone, Copy)]
pub struct ParseTreeConfig {
    pub depth: usize,
    pub similarity_threshold: f64,
    pub max_children: usize,
}

impl Default for ParseTreeConfig {
    fn default() -> Self {
        ParseTreeConfig { depth: 4, similarity_threshold: 0.4, max_children: 100 }
    }
}

impl ParseTreeConfig {
    pub fn new(depth: usize, similarity_threshold: f64, max_children: usize) -> Result<Self> {
        if depth < 2 {
            return Err(Error::InvalidConfig(format!("parse tree depth must be >= 2, got {depth}")));
        }
        if !(similarity_threshold > 0.0 && similarity_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "similarity threshold must be in (0, 1], got {similarity_threshold}"
            )));
        }
        if max_children < 1 {
            return Err(Error::InvalidConfig("max_children must be >= 1".into()));
        }
        Ok(ParseTreeConfig { depth, similarity_threshold, max_children })
    }
}

/// Result of parsing a whole corpus: the template inventory plus one
/// [`ParsedLog`] per record, in record order.
#[derive(Debug, Clone)]
pub struct ParsedCorpus {
    pub templates: Vec<Template>,
    pub logs: Vec<ParsedLog>,
}

impl ParsedCorpus {
    pub fn template_of(&self, log_id: usize) -> &Template {
        &self.templates[self.logs[log_id].template_id]
    }

    /// Templates as `id<TAB>template` lines.
    pub fn export_templates(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for t in &self.templates {
            writeln!(f, "{}\t{}", t.id, t.render()).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Parsed logs as `log_id<TAB>template_id<TAB>param1,param2,...` lines.
    pub fn export_parsed(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for p in &self.logs {
            writeln!(f, "{}\t{}\t{}", p.log_id, p.template_id, p.parameters.join(","))
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Masked form of a raw token: what the tree sees.
fn mask_token(raw: &str) -> TemplateToken {
    let has_digit = |s: &str| s.chars().any(|c| c.is_ascii_digit());
    if let Some(rest) = raw.strip_prefix('/') {
        if !rest.is_empty() && has_digit(rest) {
            return TemplateToken::Wildcard { prefix: "/".into() };
        }
    }
    if has_digit(raw) {
        return TemplateToken::Wildcard { prefix: String::new() };
    }
    TemplateToken::Constant(raw.to_string())
}

#[derive(Default)]
struct TreeNode {
    children: BTreeMap<String, TreeNode>,
    // template ids, in creation order
    clusters: Vec<usize>,
}

const FALLBACK_KEY: &str = "<*>";

struct DrainTree {
    config: ParseTreeConfig,
    roots: BTreeMap<usize, TreeNode>,
    templates: Vec<Template>,
}

impl DrainTree {
    fn new(config: ParseTreeConfig) -> Self {
        DrainTree { config, roots: BTreeMap::new(), templates: Vec::new() }
    }

    /// Fraction of positions whose keys match exactly. Wildcard positions
    /// match wildcard-masked tokens of the same shape, so re-inserting a
    /// member log always scores 1.0.
    fn similarity(template: &Template, masked: &[TemplateToken]) -> f64 {
        let same = template
            .tokens
            .iter()
            .zip(masked)
            .filter(|(a, b)| a.key() == b.key())
            .count();
        same as f64 / template.tokens.len() as f64
    }

    fn insert(&mut self, masked: Vec<TemplateToken>) -> usize {
        let levels = self.config.depth.saturating_sub(2).min(masked.len());
        let max_children = self.config.max_children;
        let mut node = self.roots.entry(masked.len()).or_default();
        for tok in masked.iter().take(levels) {
            let key = tok.key();
            let use_key = if node.children.contains_key(&key) {
                key
            } else if node.children.len() < max_children {
                key
            } else {
                FALLBACK_KEY.to_string()
            };
            node = node.children.entry(use_key).or_default();
        }

        let mut best: Option<(usize, f64)> = None;
        for &tid in &node.clusters {
            let sim = Self::similarity(&self.templates[tid], &masked);
            if best.map_or(true, |(_, s)| sim > s) {
                best = Some((tid, sim));
            }
        }
        if let Some((tid, sim)) = best {
            if sim >= self.config.similarity_threshold {
                let template = &mut self.templates[tid];
                for (slot, tok) in template.tokens.iter_mut().zip(&masked) {
                    if slot.key() != tok.key() {
                        *slot = TemplateToken::Wildcard { prefix: String::new() };
                    }
                }
                return tid;
            }
        }

        let tid = self.templates.len();
        self.templates.push(Template { id: tid, tokens: masked });
        node.clusters.push(tid);
        tid
    }
}

/// Mine templates for every record of `corpus` and resolve each record's
/// parameters against the final template set.
pub fn parse_corpus(corpus: &Corpus, config: ParseTreeConfig) -> ParsedCorpus {
    let mut tree = DrainTree::new(config);
    let tokenized: Vec<Vec<String>> = corpus.tokenized();
    let assignments: Vec<usize> = tokenized
        .iter()
        .map(|tokens| tree.insert(tokens.iter().map(|t| mask_token(t)).collect()))
        .collect();

    let logs = tokenized
        .iter()
        .zip(&assignments)
        .enumerate()
        .map(|(log_id, (tokens, &template_id))| {
            let template = &tree.templates[template_id];
            let parameters = tokens
                .iter()
                .zip(&template.tokens)
                .filter_map(|(raw, slot)| match slot {
                    TemplateToken::Constant(_) => None,
                    TemplateToken::Wildcard { prefix } => {
                        Some(raw.strip_prefix(prefix.as_str()).unwrap_or(raw).to_string())
                    }
                })
                .collect();
            ParsedLog { log_id, template_id, parameters }
        })
        .collect();

    ParsedCorpus { templates: tree.templates, logs }
}

/// Boolean mask over the log's tokens, true exactly at wildcard positions.
pub fn parameter_token_mask(parsed: &ParsedLog, template: &Template) -> Result<Vec<bool>> {
    if parsed.template_id != template.id {
        return Err(Error::TemplateMismatch {
            template_id: template.id,
            reason: format!("parsed log carries template {}", parsed.template_id),
        });
    }
    if parsed.parameters.len() != template.wildcard_count() {
        return Err(Error::TemplateMismatch {
            template_id: template.id,
            reason: format!(
                "{} parameters vs {} wildcards",
                parsed.parameters.len(),
                template.wildcard_count()
            ),
        });
    }
    Ok(template.tokens.iter().map(|t| t.is_wildcard()).collect())
}

/// Rebuild the token sequence of a log from its template and parameters.
pub fn reconstruct(template: &Template, parameters: &[String]) -> Vec<String> {
    let mut params = parameters.iter();
    template
        .tokens
        .iter()
        .map(|t| match t {
            TemplateToken::Constant(c) => c.clone(),
            TemplateToken::Wildcard { prefix } => {
                format!("{prefix}{}", params.next().map(String::as_str).unwrap_or(""))
            }
        })
        .collect()
}
