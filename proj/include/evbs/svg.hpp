#pragma once

#include <optional>
#include <string>
#include <vector>

namespace evbs {

// Minimal line/point charts with linear axes.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void points(std::vector<double> x, std::vector<double> y, std::string color = "#1f4e79");
  void line(std::vector<double> x, std::vector<double> y, std::string color = "#c0392b", bool dashed = false);
  // Shaded region between lower and upper, drawn below everything else.
  void band(std::vector<double> x, std::vector<double> lower, std::vector<double> upper,
            std::string color = "#bbbbbb");
  // Vertical segments from 0 to y (index and ACF plots).
  void stems(std::vector<double> x, std::vector<double> y, std::string color = "#1f4e79");
  void hline(double y, std::string color = "#c0392b", bool dashed = true);
  // Label placed next to the point (x, y), e.g. an observation index.
  void annotate(double x, double y, std::string text);
  // Written as an XML comment when set.
  void stamp(std::string text);

  std::string render(int width = 640, int height = 420) const;

 private:
  struct Layer {
    enum Kind { Points, Line, Band, Stems, HLine } kind;
    std::vector<double> x, y, y2;
    std::string color;
    bool dashed = false;
  };
  struct Note {
    double x, y;
    std::string text;
  };
  std::string title_, x_label_, y_label_;
  std::vector<Layer> layers_;
  std::vector<Note> notes_;
  std::optional<std::string> stamp_;
};

std::string xml_escape(const std::string& s);

}  // namespace evbs
