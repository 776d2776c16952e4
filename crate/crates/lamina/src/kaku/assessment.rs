/// Scalar evaluation of an output, tagged with whether bigger is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assessment {
    pub value: f64,
    pub maximize: bool,
}

impl Assessment {
    pub fn cost(value: f64) -> Self {
        Assessment {
            value,
            maximize: false,
        }
    }

    pub fn utility(value: f64) -> Self {
        Assessment {
            value,
            maximize: true,
        }
    }

    /// Strictly better under this assessment's direction.
    pub fn better_than(&self, other: &Assessment) -> bool {
        if self.maximize {
            self.value > other.value
        } else {
            self.value < other.value
        }
    }
}
