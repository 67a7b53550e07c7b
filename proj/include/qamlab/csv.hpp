#pragma once
// CSV output with a fixed wire format: '.' decimal point, ',' separator,
// LF line endings, 17 significant digits.  Config echo lines go first as
// "# key=value" comments.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qamlab {

inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path);
  }

  void comment(const std::string& key, const std::string& value) {
    out_ << "# " << key << "=" << value << "\n";
  }

  void header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i)
      out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }

  class Row {
   public:
    explicit Row(std::ofstream& out) : out_(out) {}
    ~Row() { out_ << "\n"; }
    Row& operator<<(double x) { sep(); out_ << format_g17(x); return *this; }
    Row& operator<<(int x) { sep(); out_ << x; return *this; }
    Row& operator<<(std::int64_t x) { sep(); out_ << x; return *this; }
    Row& operator<<(std::uint64_t x) { sep(); out_ << x; return *this; }
    Row& operator<<(const std::string& s) { sep(); out_ << s; return *this; }
    Row& operator<<(const char* s) { sep(); out_ << s; return *this; }

   private:
    void sep() { if (started_) out_ << ","; started_ = true; }
    std::ofstream& out_;
    bool started_ = false;
  };

  Row row() { return Row(out_); }

  bool good() const { return out_.good(); }

 private:
  std::ofstream out_;
};

}  // namespace qamlab
