//! Synthetic reasoning tasks with programmatic gold rationales.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{steps_from, Sample, TaskConfig, TaskKind};
use crate::error::{Error, Result};

const PLAYERS: [&str; 8] = ["Al", "Bo", "Cy", "Di", "Ed", "Fy", "Gu", "Hu"];
const ITEMS: [&str; 8] = ["pink", "blue", "gold", "gray", "jade", "lime", "teal", "rose"];
pub(super) const MAX_PLAYERS: usize = PLAYERS.len();

const NAMES: [&str; 40] = [
    "Ada", "Bob", "Cora", "Dan", "Elif", "Finn", "Gus", "Hana", "Ivan", "Jude", "Kai", "Lena", "Milo",
    "Nora", "Otto", "Pia", "Quinn", "Rosa", "Sam", "Tess", "Uma", "Vik", "Wren", "Xena", "Yuri", "Zoe",
    "Amir", "Beth", "Cyd", "Dora", "Emil", "Faye", "Glen", "Hugo", "Iris", "Jack", "Kim", "Liam", "Max",
    "Nell",
];

const PEOPLE: [&str; 12] = [
    "Alyssa", "Jason", "Melanie", "Keith", "Sara", "Tom", "Joan", "Mike", "Fred", "Dan", "Mary", "Tim",
];

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn sample_id(cfg: &TaskConfig, index: usize) -> String {
    format!("{}-{}-{index}", cfg.task_kind.name(), cfg.seed)
}

/// One swap between two players (indices into the player list).
pub type Swap = (usize, usize);

fn choice_letter(i: usize) -> char {
    (b'A' + i as u8) as char
}

fn state_line(players: &[&str], items: &[&str], holding: &[usize]) -> String {
    let parts: Vec<String> = players
        .iter()
        .zip(holding)
        .map(|(p, &h)| format!("{p}-{}", items[h]))
        .collect();
    format!("{}.", parts.join(", "))
}

/// Builds an object-swap sample from an explicit game.
///
/// `choices[k]` is the item index shown as option `k`; the question asks what
/// `target` holds at the end.
pub fn object_swap_sample(
    id: &str,
    players: &[&str],
    items: &[&str],
    swaps: &[Swap],
    target: usize,
    choices: &[usize],
) -> Result<Sample> {
    if players.len() < 2 || players.len() != items.len() {
        return Err(Error::Config("object swap needs >= 2 players, one item each".into()));
    }
    if swaps.is_empty() {
        return Err(Error::Config("object swap needs at least 1 swap".into()));
    }
    let n = players.len();
    let mut holding: Vec<usize> = (0..n).collect();
    let mut steps = vec![state_line(players, items, &holding)];
    for &(a, b) in swaps {
        if a >= n || b >= n || a == b {
            return Err(Error::Config(format!("invalid swap ({a}, {b})")));
        }
        holding.swap(a, b);
        steps.push(format!(
            "{}/{} swap: {}",
            players[a],
            players[b],
            state_line(players, items, &holding)
        ));
    }
    let start: Vec<String> = players
        .iter()
        .zip(items)
        .map(|(p, i)| format!("{p} has {i}"))
        .collect();
    let swap_text: Vec<String> = swaps
        .iter()
        .map(|&(a, b)| format!("{}-{}", players[a], players[b]))
        .collect();
    let options: Vec<String> = choices
        .iter()
        .enumerate()
        .map(|(k, &c)| format!("({}) {}", choice_letter(k), items[c]))
        .collect();
    let question = format!(
        "{}. Swaps: {}. {} ends with? {}",
        start.join(", "),
        swap_text.join(", "),
        players[target],
        options.join(" ")
    );
    let correct = choices
        .iter()
        .position(|&c| c == holding[target])
        .ok_or_else(|| Error::Config("the correct item is not among the choices".into()))?;
    steps.push(format!(
        "{} ends with {}, so ({}).",
        players[target],
        items[holding[target]],
        choice_letter(correct)
    ));
    Ok(Sample {
        id: id.to_string(),
        question,
        answer: choice_letter(correct).to_ascii_lowercase().to_string(),
        steps: steps_from(&steps),
        task_kind: TaskKind::ObjectSwap,
    })
}

pub fn gen_object_swap(cfg: &TaskConfig, index: usize) -> Result<Sample> {
    if cfg.task_kind != TaskKind::ObjectSwap {
        return Err(Error::Config("expected an object_swap config".into()));
    }
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, index);
    let n = cfg.entities;
    let players = &PLAYERS[..n];
    let mut items: Vec<&str> = ITEMS.to_vec();
    items.shuffle(&mut rng);
    items.truncate(n);
    let swaps: Vec<Swap> = (0..cfg.swaps)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            (a, b)
        })
        .collect();
    let target = rng.random_range(0..n);
    let mut choices: Vec<usize> = (0..n).collect();
    choices.shuffle(&mut rng);
    object_swap_sample(&sample_id(cfg, index), players, &items, &swaps, target, &choices)
}

/// Builds a last-letter sample from explicit names.
pub fn last_letter_sample(id: &str, names: &[&str]) -> Result<Sample> {
    if names.is_empty() || names.iter().any(|n| n.is_empty()) {
        return Err(Error::Config("last letter needs non-empty names".into()));
    }
    let letters: Vec<String> = names
        .iter()
        .map(|n| n.chars().last().unwrap().to_lowercase().collect())
        .collect();
    let mut steps: Vec<String> = names
        .iter()
        .zip(&letters)
        .map(|(n, l)| format!("The last letter of {n} is {l}."))
        .collect();
    let answer = letters.concat();
    steps.push(format!("Together they make {answer}."));
    Ok(Sample {
        id: id.to_string(),
        question: format!("Join the last letters of: {}.", names.join(", ")),
        answer,
        steps: steps_from(&steps),
        task_kind: TaskKind::LastLetter,
    })
}

pub fn gen_last_letter(cfg: &TaskConfig, index: usize) -> Result<Sample> {
    if cfg.task_kind != TaskKind::LastLetter {
        return Err(Error::Config("expected a last_letter config".into()));
    }
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, index);
    let names: Vec<&str> = (0..cfg.names).map(|_| *NAMES.choose(&mut rng).unwrap()).collect();
    last_letter_sample(&sample_id(cfg, index), &names)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add(u32),
    Sub(u32),
}

/// Builds an arithmetic word problem: a starting count, then gains and losses.
pub fn arithmetic_sample(id: &str, people: &[&str], start: u32, ops: &[ArithOp]) -> Result<Sample> {
    if ops.is_empty() || people.len() != ops.len() + 1 {
        return Err(Error::Config("arithmetic needs one person per term and >= 2 terms".into()));
    }
    let mut question = vec![format!("{} picked {start} plums.", people[0])];
    let mut steps = Vec::new();
    let mut total = start as i64;
    for (op, who) in ops.iter().zip(&people[1..]) {
        let before = total;
        match *op {
            ArithOp::Add(x) => {
                total += x as i64;
                question.push(format!("{who} picked {x} plums."));
                steps.push(format!("{before} + {x} = {total}."));
            }
            ArithOp::Sub(x) => {
                total -= x as i64;
                question.push(format!("{who} ate {x} plums."));
                steps.push(format!("{before} - {x} = {total}."));
            }
        }
    }
    question.push("How many plums are left?".into());
    steps.push(format!("There are {total} plums in all."));
    Ok(Sample {
        id: id.to_string(),
        question: question.join(" "),
        answer: total.to_string(),
        steps: steps_from(&steps),
        task_kind: TaskKind::Arithmetic,
    })
}

pub fn gen_arithmetic(cfg: &TaskConfig, index: usize) -> Result<Sample> {
    if cfg.task_kind != TaskKind::Arithmetic {
        return Err(Error::Config("expected an arithmetic config".into()));
    }
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, index);
    let mut people: Vec<&str> = PEOPLE.to_vec();
    people.shuffle(&mut rng);
    people.truncate(cfg.terms);
    let start = rng.random_range(1..=cfg.max_operand);
    let mut total = start;
    let ops: Vec<ArithOp> = (1..cfg.terms)
        .map(|_| {
            if cfg.subtraction && total > 0 && rng.random_bool(0.3) {
                let x = rng.random_range(1..=total.min(cfg.max_operand));
                total -= x;
                ArithOp::Sub(x)
            } else {
                let x = rng.random_range(1..=cfg.max_operand);
                total += x;
                ArithOp::Add(x)
            }
        })
        .collect();
    arithmetic_sample(&sample_id(cfg, index), &people, start, &ops)
}

/// The `index`-th sample of the stream defined by `cfg`.
pub fn generate_one(cfg: &TaskConfig, index: usize) -> Result<Sample> {
    match cfg.task_kind {
        TaskKind::ObjectSwap => gen_object_swap(cfg, index),
        TaskKind::LastLetter => gen_last_letter(cfg, index),
        TaskKind::Arithmetic => gen_arithmetic(cfg, index),
        TaskKind::Imported => Err(Error::Config("imported samples cannot be generated".into())),
    }
}

/// The first `n` samples of the stream defined by `cfg`.
pub fn generate(cfg: &TaskConfig, n: usize) -> Result<Vec<Sample>> {
    cfg.validate()?;
    (0..n).map(|i| generate_one(cfg, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::extract_answer;
    use proptest::prelude::*;

    #[test]
    fn single_swap_inverts_holdings() {
        let s = object_swap_sample("t", &["P0", "P1"], &["x", "y"], &[(0, 1)], 0, &[0, 1]).unwrap();
        assert_eq!(s.step_texts(), ["P0-x, P1-y.", "P0/P1 swap: P0-y, P1-x.", "P0 ends with y, so (B)."]);
        assert_eq!(s.answer, "b");
    }

    #[test]
    fn ball_game_story() {
        let s = object_swap_sample(
            "game",
            &["Alice", "Bob", "Claire"],
            &["orange", "purple", "pink"],
            &[(0, 2), (1, 0), (0, 2)],
            0,
            &[1, 0, 2],
        )
        .unwrap();
        let lines = s.step_texts();
        assert_eq!(lines[0], "Alice-orange, Bob-purple, Claire-pink.");
        assert_eq!(lines[1], "Alice/Claire swap: Alice-pink, Bob-purple, Claire-orange.");
        assert_eq!(lines[2], "Bob/Alice swap: Alice-purple, Bob-pink, Claire-orange.");
        assert_eq!(lines[3], "Alice/Claire swap: Alice-orange, Bob-pink, Claire-purple.");
        assert_eq!(lines[4], "Alice ends with orange, so (B).");
        assert!(s.question.ends_with("(A) purple (B) orange (C) pink"));
        assert_eq!(s.answer, "b");
    }

    #[test]
    fn last_letter_examples() {
        assert_eq!(last_letter_sample("a", &["Ada"]).unwrap().answer, "a");
        let s = last_letter_sample("b", &["Ada", "Bob"]).unwrap();
        assert_eq!(s.answer, "ab");
        assert_eq!(s.steps.len(), 3);
        assert_eq!(last_letter_sample("c", &["Eve", "Eve"]).unwrap().answer, "ee");
        assert!(last_letter_sample("d", &[]).is_err());
    }

    #[test]
    fn arithmetic_examples() {
        let s = arithmetic_sample("p", &["Alyssa", "Jason", "Melanie"], 17, &[ArithOp::Add(10), ArithOp::Add(35)])
            .unwrap();
        assert_eq!(s.step_texts(), ["17 + 10 = 27.", "27 + 35 = 62.", "There are 62 plums in all."]);
        assert_eq!(s.answer, "62");
        let s = arithmetic_sample("z", &["A", "B"], 41, &[ArithOp::Add(0)]).unwrap();
        assert_eq!(s.answer, "41");
    }

    #[test]
    fn generators_reject_bad_configs() {
        let mut c = TaskConfig::new(TaskKind::ObjectSwap, 1);
        c.entities = 1;
        assert!(matches!(gen_object_swap(&c, 0), Err(Error::Config(_))));
        let c = TaskConfig::new(TaskKind::Arithmetic, 1);
        assert!(gen_object_swap(&c, 0).is_err());
    }

    fn permutation_oracle(n: usize, swaps: &[Swap]) -> Vec<usize> {
        // Compose transpositions as permutations acting on positions.
        let mut perm: Vec<usize> = (0..n).collect();
        for &(a, b) in swaps {
            let mut t: Vec<usize> = (0..n).collect();
            t[a] = b;
            t[b] = a;
            perm = (0..n).map(|i| perm[t[i]]).collect();
        }
        perm
    }

    fn arithmetic_fold(question: &str) -> i64 {
        let words: Vec<&str> = question.split(' ').collect();
        let mut total = 0;
        for w in words.windows(2) {
            if let Ok(x) = w[1].parse::<i64>() {
                total += if w[0] == "ate" { -x } else { x };
            }
        }
        total
    }

    proptest! {
        #[test]
        fn object_swap_matches_permutation_oracle(seed in any::<u64>(), n in 2usize..6, k in 1usize..6) {
            let mut cfg = TaskConfig::new(TaskKind::ObjectSwap, seed);
            cfg.entities = n;
            cfg.swaps = k;
            let s = gen_object_swap(&cfg, 0).unwrap();
            prop_assert_eq!(s.steps.len(), k + 2);
            let swap_part = s.question.split("Swaps: ").nth(1).unwrap().split(". ").next().unwrap();
            let swaps: Vec<Swap> = swap_part.split(", ").map(|p| {
                let (a, b) = p.split_once('-').unwrap();
                (PLAYERS.iter().position(|x| *x == a).unwrap(), PLAYERS.iter().position(|x| *x == b).unwrap())
            }).collect();
            let initial: Vec<&str> = s.steps[0].text.trim_end_matches('.').split(", ").collect();
            let perm = permutation_oracle(n, &swaps);
            let expected: Vec<String> = (0..n).map(|i| {
                let item = initial[perm[i]].split_once('-').unwrap().1;
                format!("{}-{item}", PLAYERS[i])
            }).collect();
            let (_, last_state) = s.steps[k].text.split_once(" swap: ").unwrap();
            prop_assert_eq!(last_state.to_string(), format!("{}.", expected.join(", ")));
            prop_assert_eq!(extract_answer(&format!("<answer> {}", s.answer), TaskKind::ObjectSwap), Some(s.answer.clone()));
        }

        #[test]
        fn arithmetic_answer_is_the_fold(seed in any::<u64>(), terms in 2usize..6, i in 0usize..20) {
            let mut cfg = TaskConfig::new(TaskKind::Arithmetic, seed);
            cfg.terms = terms;
            let s = gen_arithmetic(&cfg, i).unwrap();
            prop_assert_eq!(s.answer.clone(), arithmetic_fold(&s.question).to_string());
            prop_assert_eq!(s.steps.len(), terms);
        }

        #[test]
        fn last_letter_matches_slicing(seed in any::<u64>(), k in 1usize..6) {
            let mut cfg = TaskConfig::new(TaskKind::LastLetter, seed);
            cfg.names = k;
            let s = gen_last_letter(&cfg, 3).unwrap();
            let list = s.question.trim_start_matches("Join the last letters of: ").trim_end_matches('.');
            let oracle: String = list.split(", ").map(|n| n[n.len() - 1..].to_lowercase()).collect();
            prop_assert_eq!(s.answer.clone(), oracle);
            prop_assert_eq!(s.steps.len(), k + 1);
        }

        #[test]
        fn generation_is_a_pure_function_of_config(seed in any::<u64>(), i in 0usize..100) {
            for kind in [TaskKind::ObjectSwap, TaskKind::LastLetter, TaskKind::Arithmetic] {
                let cfg = TaskConfig::new(kind, seed);
                prop_assert_eq!(generate_one(&cfg, i).unwrap(), generate_one(&cfg, i).unwrap());
            }
        }
    }
}
