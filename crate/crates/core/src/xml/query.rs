use super::{AnnotatedBook, Paragraph, Pos, Section, Sentence, Token};
use crate::error::{Error, Result};

/// What to traverse in [`AnnotatedBook::query`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Tokens,
    Sentences,
    Paragraphs,
    Sections,
    /// First token of every mention of a character.
    MentionsOf(u32),
    TokensWithPos(Pos),
}

#[derive(Debug, Clone, Copy)]
pub enum Node<'a> {
    Token(&'a Token),
    Sentence(&'a Sentence),
    Paragraph(&'a Paragraph),
    Section(&'a Section),
}

impl<'a> Node<'a> {
    pub fn as_token(self) -> Option<&'a Token> {
        match self {
            Node::Token(t) => Some(t),
            _ => None,
        }
    }
}

impl AnnotatedBook {
    /// Document-order traversal of the nodes matching `selector`.
    pub fn query<'a>(
        &'a self,
        selector: Selector,
    ) -> Result<Box<dyn Iterator<Item = Node<'a>> + 'a>> {
        Ok(match selector {
            Selector::Tokens => Box::new(self.tokens().map(Node::Token)),
            Selector::Sentences => Box::new(self.sentences().map(Node::Sentence)),
            Selector::Paragraphs => Box::new(
                self.body
                    .sections
                    .iter()
                    .flat_map(|s| &s.paragraphs)
                    .map(Node::Paragraph),
            ),
            Selector::Sections => Box::new(self.body.sections.iter().map(Node::Section)),
            Selector::MentionsOf(id) => {
                let character = self.character(id).ok_or(Error::UnknownCharacter(id))?;
                let wanted = &character.mention_token_indices;
                Box::new(
                    self.tokens()
                        .filter(move |t| wanted.binary_search(&t.global_index).is_ok())
                        .map(Node::Token),
                )
            }
            Selector::TokensWithPos(pos) => Box::new(
                self.tokens()
                    .filter(move |t| t.pos == Some(pos))
                    .map(Node::Token),
            ),
        })
    }
}

/// A token with its position in the document structure.
#[derive(Debug, Clone, Copy)]
pub struct FlatToken<'a> {
    pub token: &'a Token,
    pub section: usize,
    pub paragraph: usize,
    pub sentence: usize,
    /// True for the first token of its sentence.
    pub sentence_start: bool,
}

/// Flattened, index-addressable view of a book's tokens.
///
/// Paragraph and sentence numbers are global (running across sections).
#[derive(Debug, Clone)]
pub struct TokenTable<'a> {
    pub tokens: Vec<FlatToken<'a>>,
    /// Half-open flat-token ranges of every sentence.
    pub sentences: Vec<(usize, usize)>,
    /// Half-open flat-sentence ranges of every paragraph.
    pub paragraphs: Vec<(usize, usize)>,
    /// Flat index of the first token of every section (equal to the next
    /// section's start when a section has no tokens).
    pub section_starts: Vec<usize>,
}

impl<'a> TokenTable<'a> {
    pub fn new(book: &'a AnnotatedBook) -> Self {
        let mut tokens = Vec::new();
        let mut sentences = Vec::new();
        let mut paragraphs = Vec::new();
        let mut section_starts = Vec::new();
        for (si, section) in book.body.sections.iter().enumerate() {
            section_starts.push(tokens.len());
            for paragraph in &section.paragraphs {
                let p_start = sentences.len();
                for sentence in &paragraph.sentences {
                    let start = tokens.len();
                    for (k, token) in sentence.tokens.iter().enumerate() {
                        tokens.push(FlatToken {
                            token,
                            section: si,
                            paragraph: paragraphs.len(),
                            sentence: sentences.len(),
                            sentence_start: k == 0,
                        });
                    }
                    sentences.push((start, tokens.len()));
                }
                paragraphs.push((p_start, sentences.len()));
            }
        }
        TokenTable {
            tokens,
            sentences,
            paragraphs,
            section_starts,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self, i: usize) -> &'a str {
        &self.tokens[i].token.text
    }

    /// Flat position of the token with `global_index`.
    pub fn position_of(&self, global_index: usize) -> Option<usize> {
        self.tokens
            .binary_search_by_key(&global_index, |t| t.token.global_index)
            .ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xml::{Meta, Paragraph, Section, Sentence, Token};

    fn book() -> AnnotatedBook {
        let mut hi = Token::new("Hi", 0, 0);
        hi.pos = Some(Pos::Intj);
        let mut dot = Token::new(".", 1, 3);
        dot.pos = Some(Pos::Punct);
        dot.trailing_ws = String::new();
        AnnotatedBook {
            meta: Meta {
                source_id: "t".into(),
                corpus: "test".into(),
                ..Meta::default()
            },
            body: crate::xml::Body {
                sections: vec![Section {
                    header: None,
                    paragraphs: vec![Paragraph {
                        sentences: vec![Sentence {
                            tokens: vec![hi, dot],
                        }],
                    }],
                }],
                ..Default::default()
            },
            ..AnnotatedBook::default()
        }
    }

    #[test]
    fn counts_are_consistent() {
        let b = book();
        assert_eq!(b.query(Selector::Tokens).unwrap().count(), 2);
        let per_sentence: usize = b
            .query(Selector::Sentences)
            .unwrap()
            .map(|n| match n {
                Node::Sentence(s) => s.tokens.len(),
                _ => unreachable!(),
            })
            .sum();
        assert_eq!(per_sentence, 2);
        assert_eq!(b.query(Selector::Paragraphs).unwrap().count(), 1);
        assert_eq!(b.query(Selector::Sections).unwrap().count(), 1);
    }

    #[test]
    fn punct_selector() {
        let b = book();
        let texts: Vec<_> = b
            .query(Selector::TokensWithPos(Pos::Punct))
            .unwrap()
            .filter_map(Node::as_token)
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(texts, vec!["."]);
    }

    #[test]
    fn unknown_character_is_an_error() {
        let b = book();
        assert!(matches!(
            b.query(Selector::MentionsOf(7)),
            Err(Error::UnknownCharacter(7))
        ));
    }

    #[test]
    fn table_positions() {
        let b = book();
        let table = TokenTable::new(&b);
        assert_eq!(table.len(), 2);
        assert_eq!(table.sentences, vec![(0, 2)]);
        assert_eq!(table.position_of(1), Some(1));
        assert!(table.tokens[0].sentence_start);
    }
}
