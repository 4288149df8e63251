//! Mutations of valid scenario text, each of which must be rejected.

use rand_core::RngCore;
use relfacts::scenario::lexer::{tokenize, Token, TokenKind};
use relfacts::scenario::{parse, ParseError};

const JUNK: &[char] = &['$', '@', '!', '%', '&', '*', '{', '}', '?', '~', '`', '^', '|', '<', '>', '\\', '/', ':'];

const GRAMMAR_WORDS: &[&str] =
    &["dim", "ready", "on", "with", "using", "seed", "into", "overlap", "partition", "target", "against"];

const STEP_WORDS: &[&str] = &["premeasure", "measure", "unitary-view", "decohere", "stability-check", "cross-check"];

fn pick<R: RngCore>(rng: &mut R, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn line_tokens(line: &str) -> Vec<Token> {
    tokenize(line).map(|t| t.into_iter().filter(|t| t.kind != TokenKind::Newline).collect()).unwrap_or_default()
}

/// Byte offset of a 1-based char column.
fn byte_at(line: &str, column: usize) -> usize {
    line.char_indices().nth(column - 1).map_or(line.len(), |(b, _)| b)
}

fn first_word(line: &str) -> &str {
    line.split_whitespace().next().unwrap_or("")
}

/// Applies one mutation chosen at random. `source` must be canonical
/// printer output (no comments, no blank lines).
pub fn mutate<R: RngCore>(source: &str, rng: &mut R) -> String {
    let mut lines: Vec<String> = source.lines().map(str::to_string).collect();
    loop {
        let i = pick(rng, lines.len());
        let line = lines[i].clone();
        let tokens = line_tokens(&line);
        let head = first_word(&line);
        match pick(rng, 6) {
            // junk character outside string literals
            0 if head != "scenario" => {
                let at = byte_at(&line, 1 + pick(rng, line.chars().count() + 1));
                let c = JUNK[pick(rng, JUNK.len())];
                lines[i] = format!("{}{c}{}", &line[..at], &line[at..]);
            }
            // drop the last token
            1 if !tokens.is_empty() => {
                let last = tokens.last().unwrap();
                lines[i] = line[..byte_at(&line, last.column)].trim_end().to_string();
            }
            // reference a name that was never declared
            2 if STEP_WORDS.contains(&head) => {
                let refs: Vec<&Token> = tokens[1..]
                    .iter()
                    .filter(|t| matches!(&t.kind, TokenKind::Word(w) if !GRAMMAR_WORDS.contains(&w.as_str())))
                    .collect();
                if refs.is_empty() {
                    continue;
                }
                let t = refs[pick(rng, refs.len())];
                let TokenKind::Word(w) = &t.kind else { unreachable!() };
                let at = byte_at(&line, t.column);
                lines[i] = format!("{}undeclared_{}{}", &line[..at], pick(rng, 1000), &line[at + w.len()..]);
            }
            // unknown statement keyword
            3 => {
                lines[i] = format!("{}{} {line}", ["frob", "xyzzy", "measur", "Observer"][pick(rng, 4)], pick(rng, 10));
            }
            // declare something twice
            4 if !STEP_WORDS.contains(&head) => {
                lines.insert(i + 1, line);
            }
            // letter glued to a number
            5 => {
                let nums: Vec<&Token> =
                    tokens.iter().filter(|t| matches!(t.kind, TokenKind::Number { .. } | TokenKind::Imag(_))).collect();
                if nums.is_empty() {
                    continue;
                }
                let t = nums[pick(rng, nums.len())];
                let at = byte_at(&line, t.column);
                let end = line[at..].find([',', ';', ')', ']', ' ']).map_or(line.len(), |e| at + e);
                lines[i] = format!("{}q{}", &line[..end], &line[end..]);
            }
            _ => continue,
        }
        let mut out = lines.join("\n");
        out.push('\n');
        return out;
    }
}

/// Whether an error's position lies inside `source`.
pub fn position_in_source(err: &ParseError, source: &str) -> bool {
    let lines: Vec<&str> = source.split('\n').collect();
    err.line >= 1 && err.line <= lines.len() && err.column >= 1 && err.column <= lines[err.line - 1].chars().count() + 1
}

#[derive(Debug, Default)]
pub struct FuzzStats {
    pub cases: usize,
    pub rejected: usize,
    pub accepted: Vec<String>,
    pub bad_positions: usize,
    pub panics: usize,
}

pub fn run_fuzz(corpus: &[String], cases: usize, seed: u64) -> FuzzStats {
    let mut rng = relfacts::rng::SplitMix64::new(seed);
    let mut stats = FuzzStats::default();
    for k in 0..cases {
        let base = &corpus[k % corpus.len()];
        let mutated = mutate(base, &mut rng);
        stats.cases += 1;
        match std::panic::catch_unwind(|| parse(&mutated)) {
            Err(_) => stats.panics += 1,
            Ok(Ok(_)) => stats.accepted.push(mutated),
            Ok(Err(e)) => {
                stats.rejected += 1;
                if !position_in_source(&e, &mutated) {
                    stats.bad_positions += 1;
                }
            }
        }
    }
    stats
}
