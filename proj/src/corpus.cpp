#include "safectrl/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "safectrl/errors.hpp"
#include "safectrl/rng.hpp"

namespace safectrl {

void TrainingCorpus::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("corpus", "cannot write " + path);
  const int n = task_dim, m = dof;
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",u_" << i;
  for (int i = 1; i <= m; ++i) out << ",q_" << i;
  for (int i = 1; i <= m; ++i) out << ",qd_" << i;
  for (int i = 1; i <= n * m; ++i) out << ",x_" << i;
  out << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };
  for (int s = 0; s < size(); ++s) {
    std::snprintf(buf, sizeof buf, "%.17g", t[s]);
    out << buf;
    for (int i = 0; i < n; ++i) put(U(s, i));
    for (int i = 0; i < m; ++i) put(Q(s, i));
    for (int i = 0; i < m; ++i) put(Qd(s, i));
    for (int i = 0; i < n * m; ++i) put(X(s, i));
    out << "\n";
  }
}

TrainingCorpus TrainingCorpus::load_csv(const std::string& path, int dof,
                                        int task_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("corpus", "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("corpus", "empty file");

  const int n = task_dim, m = dof;
  const int expect = 1 + n + 2 * m + n * m;
  {
    std::stringstream hs(line);
    std::string cell;
    int count = 0;
    while (std::getline(hs, cell, ',')) ++count;
    if (count != expect)
      throw ConfigError("corpus", "expected " + std::to_string(expect) +
                                      " columns, found " + std::to_string(count));
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != expect)
      throw ConfigError("corpus", "ragged row in " + path);
    rows.push_back(std::move(row));
  }

  TrainingCorpus c;
  c.dof = m;
  c.task_dim = n;
  const int N = static_cast<int>(rows.size());
  c.t.resize(N);
  c.U.resize(N, n);
  c.Q.resize(N, m);
  c.Qd.resize(N, m);
  c.X.resize(N, n * m);
  for (int s = 0; s < N; ++s) {
    int k = 0;
    c.t[s] = rows[s][k++];
    for (int i = 0; i < n; ++i) c.U(s, i) = rows[s][k++];
    for (int i = 0; i < m; ++i) c.Q(s, i) = rows[s][k++];
    for (int i = 0; i < m; ++i) c.Qd(s, i) = rows[s][k++];
    for (int i = 0; i < n * m; ++i) c.X(s, i) = rows[s][k++];
  }
  return c;
}

TrainingCorpus::Split TrainingCorpus::split(double held_fraction,
                                            std::uint64_t seed) const {
  if (!(held_fraction > 0.0 && held_fraction <= 0.5))
    throw ContractViolation("held fraction must be in (0, 0.5]");
  const int N = size();
  const int held = std::max(1, static_cast<int>(N * held_fraction));
  Rng rng = Rng(seed).fork(0x73706c69ULL);  // split stream
  const std::vector<int> perm = rng.permutation(N);

  auto take = [&](int from, int count) {
    TrainingCorpus c;
    c.dof = dof;
    c.task_dim = task_dim;
    c.t.resize(count);
    c.U.resize(count, U.cols());
    c.Q.resize(count, Q.cols());
    c.Qd.resize(count, Qd.cols());
    c.X.resize(count, X.cols());
    for (int i = 0; i < count; ++i) {
      const int s = perm[from + i];
      c.t[i] = t[s];
      c.U.row(i) = U.row(s);
      c.Q.row(i) = Q.row(s);
      c.Qd.row(i) = Qd.row(s);
      c.X.row(i) = X.row(s);
    }
    return c;
  };
  Split out{take(held, N - held), take(0, held)};
  return out;
}

}  // namespace safectrl
