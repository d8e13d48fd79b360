"""Regenerates the desk suite: CSV data, reference charts and suite.jsonl."""

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

HERE = Path(__file__).resolve().parent
rng = np.random.default_rng(7)


def save(fig, name):
    fig.tight_layout()
    fig.savefig(HERE / "gt" / f"{name}.png", dpi=60)
    plt.close(fig)


def sales():
    months = pd.date_range("2023-01-01", periods=12, freq="MS").strftime("%Y-%m")
    df = pd.DataFrame({"month": months,
                       "north": rng.integers(80, 140, 12),
                       "south": rng.integers(60, 120, 12)})
    df.to_csv(HERE / "data/sales.csv", index=False)
    return df


def grades():
    df = pd.DataFrame({"student": [f"s{i:02d}" for i in range(40)],
                       "class": rng.choice(["A", "B", "C"], 40),
                       "score": rng.normal(72, 12, 40).round(1)})
    df.to_csv(HERE / "data/grades.csv", index=False)
    return df


def weather():
    days = pd.date_range("2024-06-01", periods=30, freq="D").strftime("%Y-%m-%d")
    df = pd.DataFrame({"date": days,
                       "temp_c": (22 + 5 * np.sin(np.arange(30) / 4) + rng.normal(0, 1, 30)).round(1),
                       "rain_mm": rng.gamma(1.2, 2.0, 30).round(1)})
    df.to_csv(HERE / "data/weather.csv", index=False)
    return df


def cars():
    n = 50
    hp = rng.uniform(70, 250, n).round()
    df = pd.DataFrame({"horsepower": hp,
                       "mpg": (45 - 0.12 * hp + rng.normal(0, 2.5, n)).round(1),
                       "origin": rng.choice(["EU", "US", "JP"], n)})
    df.to_csv(HERE / "data/cars.csv", index=False)
    return df


def main():
    s, g, w, c = sales(), grades(), weather(), cars()
    items = []

    def item(id_, query, desc, files, gt=True):
        row = {"id": id_, "query": query, "dataset_description": desc,
               "data_files": [{"name": f, "path": f"data/{f}"} for f in files]}
        if gt:
            row["gt_image"] = f"gt/{id_}.png"
        items.append(row)

    sales_desc = "sales.csv: month (YYYY-MM), north (int units), south (int units); 12 rows."
    grades_desc = "grades.csv: student (id), class (A/B/C), score (float 0-100); 40 rows."
    weather_desc = "weather.csv: date (YYYY-MM-DD), temp_c (float), rain_mm (float); 30 rows."
    cars_desc = "cars.csv: horsepower (float), mpg (float), origin (EU/US/JP); 50 rows."

    fig, ax = plt.subplots()
    ax.plot(s.month, s.north, label="north")
    ax.plot(s.month, s.south, label="south")
    ax.set_xlabel("month"); ax.set_ylabel("units"); ax.legend(); ax.tick_params(axis="x", rotation=45)
    save(fig, "sales_trend")
    item("sales_trend", "Show how sales in both regions developed over the year.", sales_desc, ["sales.csv"])

    fig, ax = plt.subplots()
    ax.bar(["north", "south"], [s.north.sum(), s.south.sum()])
    ax.set_ylabel("total units")
    save(fig, "sales_total")
    item("sales_total", "Compare the total sales of the two regions.", sales_desc, ["sales.csv"])

    fig, ax = plt.subplots()
    ax.stackplot(range(12), s.north, s.south, labels=["north", "south"])
    ax.set_xticks(range(12), s.month, rotation=45); ax.legend()
    save(fig, "sales_share")
    item("sales_share", "Visualize each region's contribution to monthly sales.", sales_desc, ["sales.csv"])

    fig, ax = plt.subplots()
    ax.hist(g.score, bins=10)
    ax.set_xlabel("score"); ax.set_ylabel("students")
    save(fig, "grade_dist")
    item("grade_dist", "What does the score distribution look like?", grades_desc, ["grades.csv"])

    fig, ax = plt.subplots()
    g.boxplot(column="score", by="class", ax=ax)
    fig.suptitle("")
    save(fig, "grade_by_class")
    item("grade_by_class", "Compare scores across classes.", grades_desc, ["grades.csv"])

    fig, ax = plt.subplots()
    ax.plot(w.date, w.temp_c)
    ax.set_xticks(w.date[::5]); ax.tick_params(axis="x", rotation=45); ax.set_ylabel("temp_c")
    save(fig, "temp_line")
    item("temp_line", "Plot the temperature over June.", weather_desc, ["weather.csv"])

    fig, ax1 = plt.subplots()
    ax1.bar(w.date, w.rain_mm, color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(w.date, w.temp_c, color="tab:red")
    ax1.set_xticks(w.date[::5]); ax1.tick_params(axis="x", rotation=45)
    save(fig, "rain_temp")
    item("rain_temp", "Show rainfall together with temperature.", weather_desc, ["weather.csv"])

    fig, ax = plt.subplots()
    for origin, part in c.groupby("origin"):
        ax.scatter(part.horsepower, part.mpg, label=origin)
    ax.set_xlabel("horsepower"); ax.set_ylabel("mpg"); ax.legend()
    save(fig, "hp_mpg")
    item("hp_mpg", "How does fuel efficiency relate to power?", cars_desc, ["cars.csv"])

    fig, ax = plt.subplots()
    c.groupby("origin").mpg.mean().plot.bar(ax=ax)
    ax.set_ylabel("mean mpg")
    save(fig, "mpg_origin")
    item("mpg_origin", "Which origin has the most efficient cars?", cars_desc, ["cars.csv"])

    item("sales_vs_rain", "Is there any relation between rain and northern sales?",
         sales_desc + " " + weather_desc, ["sales.csv", "weather.csv"], gt=False)

    with open(HERE / "suite.jsonl", "w") as f:
        for row in items:
            f.write(json.dumps(row) + "\n")


if __name__ == "__main__":
    main()
