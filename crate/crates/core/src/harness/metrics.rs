use super::Error;

fn check_aligned<T>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<(), Error> {
    if gold.len() != pred.len() {
        return Err(Error::Misaligned(format!(
            "{} gold sentences, {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Misaligned(format!(
                "sentence {i}: {} gold tokens, {} predicted",
                g.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Percentage of tokens whose predicted tag equals the gold tag.
pub fn token_accuracy<T: PartialEq>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<f64, Error> {
    check_aligned(gold, pred)?;
    let total = gold.iter().map(Vec::len).sum();
    let correct = gold
        .iter()
        .zip(pred)
        .map(|(g, p)| g.iter().zip(p).filter(|(a, b)| a == b).count())
        .sum();
    Ok(percent(correct, total))
}

/// Percentage of sentences tagged entirely correctly.
pub fn sentence_accuracy<T: PartialEq>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<f64, Error> {
    check_aligned(gold, pred)?;
    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(percent(correct, gold.len()))
}
