//! Offset-tracking line and token cursors shared by the text parsers.

pub(crate) struct Lines<'a> {
    data: &'a [u8],
    pos: usize,
    line_no: usize,
}

impl<'a> Lines<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Lines {
            data,
            pos: 0,
            line_no: 0,
        }
    }

    /// Byte offset of the next unread line.
    pub fn offset(&self) -> usize {
        self.pos
    }

    /// 1-based number of the last line returned.
    pub fn line_no(&self) -> usize {
        self.line_no
    }

    /// Next line without its terminator, with its starting byte offset.
    /// Invalid UTF-8 is replaced rather than rejected; callers validate
    /// content field by field.
    pub fn next_line(&mut self) -> Option<(usize, &'a str)> {
        if self.pos >= self.data.len() {
            return None;
        }
        let start = self.pos;
        let rest = &self.data[start..];
        let (line, advance) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        self.line_no += 1;
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        Some((start, std::str::from_utf8(line).unwrap_or("\u{FFFD}")))
    }
}

pub(crate) struct Tokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    pub fn new(data: &'a [u8], start: usize) -> Self {
        Tokens { data, pos: start }
    }

    pub fn next_token(&mut self) -> Option<(usize, &'a str)> {
        let d = self.data;
        while self.pos < d.len() && d[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= d.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < d.len() && !d[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some((
            start,
            std::str::from_utf8(&d[start..self.pos]).unwrap_or("\u{FFFD}"),
        ))
    }
}

/// Parses a float, also accepting Fortran `D` exponents.
pub(crate) fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().or_else(|| {
        if s.contains(['D', 'd']) {
            s.replace(['D', 'd'], "E").parse().ok()
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_track_offsets_and_crlf() {
        let mut l = Lines::new(b"ab\r\ncd\nef");
        assert_eq!(l.next_line(), Some((0, "ab")));
        assert_eq!(l.next_line(), Some((4, "cd")));
        assert_eq!(l.next_line(), Some((7, "ef")));
        assert_eq!(l.line_no(), 3);
        assert_eq!(l.next_line(), None);
    }

    #[test]
    fn tokens_track_offsets() {
        let mut t = Tokens::new(b"  1.0\n 2e3  x", 0);
        assert_eq!(t.next_token(), Some((2, "1.0")));
        assert_eq!(t.next_token(), Some((7, "2e3")));
        assert_eq!(t.next_token(), Some((12, "x")));
        assert_eq!(t.next_token(), None);
        assert_eq!(parse_f64("1.5D-02"), Some(0.015));
        assert_eq!(parse_f64("abc"), None);
    }
}
